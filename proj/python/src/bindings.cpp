#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include "kgvqa/autodiff/checkpoint.hpp"
#include "kgvqa/error.hpp"
#include "kgvqa/experiments/harness.hpp"
#include "kgvqa/io/dataset.hpp"
#include "kgvqa/io/synthetic.hpp"
#include "kgvqa/io/trace.hpp"
#include "kgvqa/model/network.hpp"
#include "kgvqa/retrieval/retrieval.hpp"
#include "kgvqa/train/trainer.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace kgvqa;

namespace {

// Structured values cross the boundary as JSON text; the Python package
// decodes them into dicts.
json parse(const std::string& s) { return s.empty() ? json::object() : json::parse(s); }

template <class T>
T layered(T base, const std::string& overrides) {
    json j = base;
    j.merge_patch(parse(overrides));
    return j.get<T>();
}

struct Model {
    model::ModelParams params;
    std::vector<double> loss_curve;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Knowledge-graph reasoning for visual question answering";
    m.attr("REPORT_FORMAT_VERSION") = experiments::kReportFormatVersion;
    m.attr("TRACE_FORMAT_VERSION") = io::kTraceFormatVersion;

    static py::exception<Error> error(m, "Error");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(error, (std::string(error_code_name(e.code())) + ": " + e.what()).c_str());
        } catch (const json::exception& e) {
            py::set_error(PyExc_ValueError, e.what());
        }
    });

    py::class_<graph::Instance>(m, "Instance")
        .def_property_readonly("id", [](const graph::Instance& i) { return i.id; })
        .def_property_readonly("entities", [](const graph::Instance& i) { return i.entities(); })
        .def_property_readonly("answer", [](const graph::Instance& i) { return i.answer; })
        .def_property_readonly("layer_sizes", [](const graph::Instance& i) {
            return std::vector<std::size_t>{i.graph.visual.num_nodes(), i.graph.semantic.num_nodes(),
                                            i.graph.fact.num_nodes()};
        });

    py::class_<io::Dataset>(m, "Dataset")
        .def_static("load", [](const std::filesystem::path& p) { return io::load_dataset(p); })
        .def_static("synthetic",
                    [](const std::string& spec) { return io::generate_synthetic(layered(io::SyntheticSpec{}, spec)); },
                    py::arg("spec_json") = "")
        .def("write", [](const io::Dataset& d, const std::filesystem::path& dir) { return io::write_dataset_files(dir, d); })
        .def("__len__", [](const io::Dataset& d) { return d.records.size(); })
        .def_property_readonly("ids", [](const io::Dataset& d) {
            std::vector<std::string> ids;
            for (const auto& r : d.records) ids.push_back(r.id);
            return ids;
        })
        .def_property_readonly("visual_dim", [](const io::Dataset& d) { return d.header.visual_dim; })
        .def_property_readonly("word_dim", [](const io::Dataset& d) { return d.header.word_dim; })
        .def(
            "instances",
            [](const io::Dataset& d, std::optional<int> fold, bool exclude) {
                std::vector<io::InstanceRecord> recs;
                for (const auto& r : d.records)
                    if (!fold || (r.fold == *fold) != exclude) recs.push_back(r);
                return io::build_instances(d, recs, {}).instances;
            },
            py::arg("fold") = py::none(), py::arg("exclude") = false,
            "Instances of one fold, or of every other fold when exclude is set.");

    py::class_<Model>(m, "Model")
        .def_static(
            "create",
            [](std::size_t visual_dim, std::size_t word_dim, const std::string& config, std::uint64_t seed) {
                auto base = model::ModelConfig::desk_scale();
                base.visual_dim = visual_dim;
                base.word_dim = word_dim;
                auto c = layered(base, config);
                c.validate();
                return Model{model::make_model_params(c, seed), {}};
            },
            py::arg("visual_dim"), py::arg("word_dim"), py::arg("config_json") = "", py::arg("seed") = 0)
        .def_static("load",
                    [](const std::filesystem::path& p) {
                        auto ck = ad::read_checkpoint(p);
                        auto cfg = ck.at("metadata").at("model").get<model::ModelConfig>();
                        Model mdl{model::make_model_params(cfg, 0), {}};
                        ad::load_checkpoint_values(ck, mdl.params.store);
                        return mdl;
                    })
        .def("save",
             [](const Model& mdl, const std::filesystem::path& p) {
                 ad::save_checkpoint(p, mdl.params.store, {{"model", mdl.params.config}, {"loss_curve", mdl.loss_curve}});
             })
        .def_property_readonly("config_json", [](const Model& mdl) { return json(mdl.params.config).dump(); })
        .def_property_readonly("loss_curve", [](const Model& mdl) { return mdl.loss_curve; })
        .def_property_readonly("num_parameters", [](const Model& mdl) {
            std::size_t n = 0;
            for (const auto& e : mdl.params.store) n += e.tensor.values.size();
            return n;
        })
        .def(
            "train",
            [](Model& mdl, const std::vector<graph::Instance>& data, const std::string& training) {
                auto tc = layered(train::TrainingConfig{}, training);
                tc.validate();
                py::gil_scoped_release release;
                auto curve = train::train_params(mdl.params, data, tc);
                mdl.loss_curve.insert(mdl.loss_curve.end(), curve.begin(), curve.end());
                return curve;
            },
            py::arg("instances"), py::arg("training_json") = "")
        .def("probabilities",
             [](const Model& mdl, const graph::Instance& i) { return model::predict(i.graph, mdl.params).probabilities; })
        .def("predict",
             [](const Model& mdl, const graph::Instance& i) {
                 return i.entities()[model::predict_answer(model::predict(i.graph, mdl.params))];
             })
        .def("evaluate",
             [](const Model& mdl, const std::vector<graph::Instance>& data) {
                 return train::to_json(train::evaluate(data, mdl.params)).dump();
             })
        .def(
            "trace",
            [](const Model& mdl, const std::vector<graph::Instance>& data, bool raw_gates) {
                io::TraceOptions o;
                o.raw_gates = raw_gates;
                return io::export_trace(data, mdl.params, o).dump();
            },
            py::arg("instances"), py::arg("raw_gates") = false);

    m.def(
        "lr_at",
        [](std::size_t step, std::size_t total, const std::string& training) {
            return train::lr_at(step, total, layered(train::TrainingConfig{}, training));
        },
        py::arg("step"), py::arg("total_steps"), py::arg("training_json") = "");

    m.def(
        "retrieve_top_k",
        [](const std::vector<std::tuple<std::string, std::string, std::string>>& facts,
           const std::vector<double>& scores, std::size_t k) {
            if (scores.size() != facts.size()) throw Error(ErrorCode::kInvalidArgument, "retrieve_top_k: one score per fact");
            std::vector<retrieval::FactTriple> triples;
            for (const auto& [a, r, b] : facts) triples.push_back({a, r, b});
            std::size_t next = 0;
            // The scorer is called once per fact in input order.
            auto got = retrieval::retrieve_top_k(triples, [&](const retrieval::FactTriple&) { return scores[next++]; }, k);
            std::vector<std::size_t> idx;
            for (const auto& f : got.facts) idx.push_back(f.source_index);
            return idx;
        },
        py::arg("facts"), py::arg("scores"), py::arg("k"));

    m.def("check_trace", [](const std::string& doc, double tol) {
        auto c = io::check_trace(json::parse(doc), tol);
        return py::dict(py::arg("instances") = c.instances, py::arg("distributions") = c.distributions,
                        py::arg("gate_values") = c.gate_values, py::arg("violations") = c.violations);
    }, py::arg("trace_json"), py::arg("tol") = 1e-9);
}
