import math

import pytest

import kgvqa


@pytest.fixture(scope="module")
def dataset():
    return kgvqa.synthetic(num_instances=60, seed=4)


def test_synthetic_dataset_shape(dataset):
    assert len(dataset) == 60
    assert len(set(dataset.ids)) == 60
    test = dataset.instances(fold=0)
    train = dataset.instances(fold=0, exclude=True)
    assert len(test) + len(train) == 60
    inst = test[0]
    assert len(inst.entities) == 8
    assert inst.answer is not None and 0 <= inst.answer < 8
    assert inst.layer_sizes[2] == 8


def test_dataset_round_trip(dataset, tmp_path):
    path = dataset.write(str(tmp_path))
    again = kgvqa.Dataset.load(str(path))
    assert again.ids == dataset.ids


def test_train_predict_and_trace(dataset, tmp_path):
    model = kgvqa.Model.create(dataset, seed=1, hidden_dim=16, question_dim=16)
    assert model.config["hidden_dim"] == 16
    train = dataset.instances(fold=0, exclude=True)
    curve = model.train(train, epochs=2, warmup_epochs=1, batch_size=16)
    assert len(curve) == 2 and all(math.isfinite(x) for x in curve)

    test = dataset.instances(fold=0)
    report = model.evaluate(test)
    assert report["format_version"] == kgvqa.REPORT_FORMAT_VERSION
    assert report["instances"] == len(test)
    assert 0.0 <= report["top1"] <= report["top3"] <= 1.0

    probs = model.probabilities(test[0])
    assert len(probs) == len(test[0].entities)
    assert all(0.0 < p < 1.0 for p in probs)
    assert model.predict(test[0]) in test[0].entities

    trace = model.trace(test[:3], raw_gates=True)
    assert trace["format_version"] == kgvqa.TRACE_FORMAT_VERSION
    check = kgvqa.check_trace(trace)
    assert check["instances"] == 3 and check["violations"] == 0
    for inst, t in zip(test[:3], trace["instances"]):
        assert t["ranking"][0]["entity"] == model.predict(inst)

    ckpt = tmp_path / "model.json"
    model.save(ckpt)
    loaded = kgvqa.Model.load(ckpt)
    assert loaded.probabilities(test[0]) == probs


def test_schedule_endpoints():
    assert kgvqa.lr_at(0, 640) == pytest.approx(2e-4, abs=1e-12)
    assert kgvqa.lr_at(64, 640) == pytest.approx(1e-3, abs=1e-12)
    assert kgvqa.lr_at(639, 640) == pytest.approx(3.6e-4, abs=1e-12)


def test_retrieve_top_k_is_stable():
    facts = [("a", "IsA", "x"), ("b", "IsA", "y"), ("c", "UsedFor", "z"), ("d", "PartOf", "w")]
    assert kgvqa.retrieve_top_k(facts, [0.5, 0.9, 0.5, 0.1], 3) == [1, 0, 2]


def test_errors_carry_codes(tmp_path):
    with pytest.raises(kgvqa.Error, match="^E_IO"):
        kgvqa.Dataset.load(str(tmp_path / "missing.jsonl"))
    with pytest.raises(kgvqa.Error, match="^E_ARG"):
        kgvqa.retrieve_top_k([("a", "r", "b")], [], 1)
