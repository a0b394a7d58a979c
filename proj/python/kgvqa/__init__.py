"""Knowledge-graph reasoning for visual question answering."""

import json as _json

from . import _core
from ._core import Dataset, Error, Instance, REPORT_FORMAT_VERSION, TRACE_FORMAT_VERSION

__all__ = [
    "Dataset",
    "Error",
    "Instance",
    "Model",
    "REPORT_FORMAT_VERSION",
    "TRACE_FORMAT_VERSION",
    "check_trace",
    "lr_at",
    "retrieve_top_k",
    "synthetic",
]


def _dump(d):
    return _json.dumps(d or {})


def synthetic(**spec):
    """Generate a synthetic dataset; keyword arguments override the default spec."""
    return Dataset.synthetic(_dump(spec))


def lr_at(step, total_steps, **training):
    return _core.lr_at(step, total_steps, _dump(training))


def retrieve_top_k(facts, scores, k):
    """Indices of the k best-scoring (e1, relation, e2) facts; ties keep input order."""
    return _core.retrieve_top_k(list(facts), list(scores), k)


def check_trace(trace, tol=1e-9):
    return _core.check_trace(_dump(trace), tol)


class Model:
    def __init__(self, core):
        self._core = core

    @classmethod
    def create(cls, dataset, seed=0, **config):
        return cls(_core.Model.create(dataset.visual_dim, dataset.word_dim, _dump(config), seed))

    @classmethod
    def load(cls, path):
        return cls(_core.Model.load(str(path)))

    def save(self, path):
        self._core.save(str(path))

    @property
    def config(self):
        return _json.loads(self._core.config_json)

    @property
    def loss_curve(self):
        return self._core.loss_curve

    @property
    def num_parameters(self):
        return self._core.num_parameters

    def train(self, instances, **training):
        return self._core.train(list(instances), _dump(training))

    def probabilities(self, instance):
        return self._core.probabilities(instance)

    def predict(self, instance):
        return self._core.predict(instance)

    def evaluate(self, instances):
        return _json.loads(self._core.evaluate(list(instances)))

    def trace(self, instances, raw_gates=False):
        return _json.loads(self._core.trace(list(instances), raw_gates))
