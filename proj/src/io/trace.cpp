#include "kgvqa/io/trace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "kgvqa/error.hpp"
#include "kgvqa/model/network.hpp"

namespace kgvqa::io {

using nlohmann::json;

namespace {

// Indices of the n largest weights, ties by lower index.
std::vector<std::size_t> top_n(std::span<const double> w, std::span<const std::size_t> among, std::size_t n) {
    std::vector<std::size_t> idx(among.begin(), among.end());
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
    if (idx.size() > n) idx.resize(n);
    return idx;
}

json layer_json(const graph::LayerGraph& g, const model::LayerTrace& t, const TraceOptions& o) {
    json out = {{"nodes", g.node_names}, {"alpha", t.alpha}};
    json edges = json::array();
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
        json edge = {{"src", g.edge_src[e]}, {"dst", g.edge_dst[e]}, {"beta", t.beta.empty() ? 0.0 : t.beta[e]}};
        if (!g.edge_labels.empty() && !g.edge_labels[e].empty()) edge["label"] = g.edge_labels[e];
        edges.push_back(std::move(edge));
    }
    out["edges"] = std::move(edges);
    json top = json::array();
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
        std::vector<std::size_t> incoming;
        for (std::size_t e = 0; e < g.num_edges(); ++e)
            if (g.edge_dst[e] == i) incoming.push_back(e);
        top.push_back(top_n(t.beta, incoming, o.top_edges));
    }
    out["top_edges"] = std::move(top);
    if (o.messages) out["messages"] = t.messages;
    return out;
}

json gamma_json(const std::vector<double>& gamma, std::size_t facts, const TraceOptions& o) {
    if (gamma.empty()) return nullptr;
    const auto sources = gamma.size() / facts;
    json rows = json::array(), top = json::array();
    std::vector<std::size_t> all(sources);
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t i = 0; i < facts; ++i) {
        std::span<const double> row(gamma.data() + i * sources, sources);
        rows.push_back(std::vector<double>(row.begin(), row.end()));
        top.push_back(top_n(row, all, o.top_neighbors));
    }
    return {{"weights", rows}, {"top_sources", top}};
}

}  // namespace

json trace_instance(const graph::Instance& instance, const model::ModelParams& params, const TraceOptions& options) {
    const auto& g = instance.graph;
    ad::Tape tape;
    model::ForwardOptions fo;
    fo.steps = options.steps;
    auto r = model::forward(tape, g, params, fo);

    const auto facts = g.fact.num_nodes();
    const auto h = params.config.hidden_dim;
    json steps = json::array();
    for (std::size_t t = 0; t < r.trace.size(); ++t) {
        const auto& s = r.trace[t];
        json step = {{"step", t}};
        json layers = json::object();
        if (!s.visual.alpha.empty()) layers["visual"] = layer_json(g.visual, s.visual, options);
        if (!s.semantic.alpha.empty()) layers["semantic"] = layer_json(g.semantic, s.semantic, options);
        layers["fact"] = layer_json(g.fact, s.fact, options);
        layers["fact_aggregate"] = layer_json(g.fact, s.aggregate, options);
        step["layers"] = std::move(layers);
        step["gamma_visual"] = gamma_json(s.gamma_visual, facts, options);
        step["gamma_semantic"] = gamma_json(s.gamma_semantic, facts, options);

        json gates = json::array();
        for (std::size_t i = 0; i < facts; ++i) {
            const double* row = s.gates.data() + i * 3 * h;
            auto mean = [&](std::size_t seg) {
                return std::accumulate(row + seg * h, row + (seg + 1) * h, 0.0) / static_cast<double>(h);
            };
            json gate = {{"visual", mean(0)}, {"semantic", mean(1)}, {"entity", mean(2)}};
            if (options.raw_gates) gate["raw"] = std::vector<double>(row, row + 3 * h);
            gates.push_back(std::move(gate));
        }
        step["gates"] = std::move(gates);
        if (options.messages) {
            step["messages_visual"] = s.messages_visual;
            step["messages_semantic"] = s.messages_semantic;
        }
        steps.push_back(std::move(step));
    }

    const auto& pred = r.prediction;
    json ranking = json::array();
    for (auto i : pred.ranking) ranking.push_back({{"index", i}, {"entity", g.fact.node_names[i]}, {"probability", pred.probabilities[i]}});
    json out = {{"id", instance.id},
                {"question", g.question.tokens},
                {"entities", g.fact.node_names},
                {"steps", std::move(steps)},
                {"ranking", std::move(ranking)},
                {"predicted", g.fact.node_names[pred.ranking.front()]}};
    if (instance.answer) out["answer"] = g.fact.node_names[*instance.answer];
    return out;
}

json export_trace(std::span<const graph::Instance> instances, const model::ModelParams& params,
                  const TraceOptions& options) {
    json list = json::array();
    for (const auto& inst : instances) list.push_back(trace_instance(inst, params, options));
    json opts = {{"top_edges", options.top_edges},
                 {"top_neighbors", options.top_neighbors},
                 {"raw_gates", options.raw_gates},
                 {"messages", options.messages}};
    if (options.steps) opts["steps"] = *options.steps;
    return {{"format_version", kTraceFormatVersion}, {"kind", "trace"}, {"options", opts}, {"instances", list}};
}

void write_json(const std::filesystem::path& path, const json& doc) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
    out << doc.dump(2) << '\n';
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error&) {
        throw Error(ErrorCode::kSchema, path.string() + ": invalid JSON");
    }
}

namespace {

struct Checker {
    double tol;
    TraceCheck& out;

    void fail(const std::string& what) {
        if (out.violations++ == 0) out.first_violation = what;
    }

    void group(const std::vector<double>& w, const std::string& what) {
        if (w.empty()) return;
        ++out.distributions;
        double s = 0.0;
        for (double x : w) {
            if (!(x >= 0.0)) fail(what + ": negative weight");
            s += x;
        }
        if (!(std::abs(s - 1.0) <= tol)) fail(what + ": sums to " + std::to_string(s));
    }

    void layer(const json& l, const std::string& what) {
        group(l.at("alpha").get<std::vector<double>>(), what + " alpha");
        std::vector<std::vector<double>> by_dst(l.at("nodes").size());
        for (const auto& e : l.at("edges")) by_dst.at(e.at("dst").get<std::size_t>()).push_back(e.at("beta"));
        for (std::size_t i = 0; i < by_dst.size(); ++i) group(by_dst[i], what + " beta into node " + std::to_string(i));
    }

    void gamma(const json& g, const std::string& what) {
        if (g.is_null()) return;
        for (const auto& row : g.at("weights")) group(row.get<std::vector<double>>(), what);
    }

    void gate(double x, const std::string& what) {
        ++out.gate_values;
        if (!(x > 0.0 && x < 1.0)) fail(what + " outside (0, 1)");
    }
};

}  // namespace

TraceCheck check_trace(const json& doc, double tol) {
    TraceCheck out;
    Checker c{tol, out};
    if (doc.value("format_version", 0) != kTraceFormatVersion || doc.value("kind", std::string{}) != "trace") {
        throw Error(ErrorCode::kSchema, "trace: not a version " + std::to_string(kTraceFormatVersion) + " trace");
    }
    for (const auto& inst : doc.at("instances")) {
        ++out.instances;
        const auto id = inst.at("id").get<std::string>();
        for (const auto& step : inst.at("steps")) {
            const auto where = id + " step " + step.at("step").dump() + " ";
            for (const auto& [name, layer] : step.at("layers").items()) c.layer(layer, where + name);
            c.gamma(step.at("gamma_visual"), where + "gamma visual");
            c.gamma(step.at("gamma_semantic"), where + "gamma semantic");
            for (const auto& g : step.at("gates")) {
                for (const char* seg : {"visual", "semantic", "entity"}) c.gate(g.at(seg), where + "gate " + seg);
                if (g.contains("raw"))
                    for (double x : g.at("raw")) c.gate(x, where + "raw gate");
            }
        }
    }
    return out;
}

}  // namespace kgvqa::io
