#include "kgvqa/model/network.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "kgvqa/error.hpp"

namespace kgvqa::model {

namespace {

std::vector<double> copy_values(ad::Var v) {
    auto s = v.values();
    return {s.begin(), s.end()};
}

ad::Var repeat_row(ad::Var row, std::size_t n) {
    std::vector<std::uint32_t> idx(n, 0);
    return ad::gather_rows(row, idx);
}

ad::Var attention_scores(ad::Tape& tape, const ad::ParamStore& store, std::size_t w, ad::Var hidden) {
    return ad::matmul_nt(ad::tanh(hidden), tape.param(store, w));
}

void check_layer_dims(const graph::LayerGraph& layer, std::size_t node_dim, std::size_t edge_dim) {
    if (layer.empty()) return;
    const std::string name(graph::layer_name(layer.kind));
    if (layer.node_dim != node_dim) {
        throw Error(ErrorCode::kShapeMismatch, "forward: " + name + " node features have width " +
                                                   std::to_string(layer.node_dim) + ", model expects " +
                                                   std::to_string(node_dim));
    }
    if (layer.num_edges() > 0 && layer.edge_dim != edge_dim) {
        throw Error(ErrorCode::kShapeMismatch, "forward: " + name + " edge features have width " +
                                                   std::to_string(layer.edge_dim) + ", model expects " +
                                                   std::to_string(edge_dim));
    }
}

struct LayerInput {
    std::optional<ad::Var> nodes;
    std::optional<ad::Var> edge_features;
    EdgeIndex edges;
};

LayerInput prepare_layer(ad::Tape& tape, const ModelParams& params, const graph::LayerGraph& layer,
                         const LinearRef& projection, bool active) {
    LayerInput in;
    if (!active || layer.empty()) return in;
    auto raw = tape.constant(layer.num_nodes(), layer.node_dim, layer.node_features);
    in.nodes = apply(tape, params.store, projection, raw);
    in.edges = edge_index(layer);
    if (layer.num_edges() > 0) {
        in.edge_features = params.config.ablation.no_relations
                               ? tape.zeros(layer.num_edges(), layer.edge_dim)
                               : tape.constant(layer.num_edges(), layer.edge_dim, layer.edge_features);
    }
    return in;
}

LayerTrace trace_of(const IntraModalResult& r) {
    LayerTrace t;
    t.alpha = copy_values(r.alpha);
    if (r.beta) t.beta = copy_values(*r.beta);
    t.messages = copy_values(r.messages);
    return t;
}

}  // namespace

EdgeIndex edge_index(const graph::LayerGraph& layer) { return {layer.edge_src, layer.edge_dst}; }

ad::Var node_attention(const ad::ParamStore& store, const IntraModalParams& p, ad::Var nodes, ad::Var question) {
    ad::Tape& tape = *nodes.tape;
    auto hidden = ad::add_row(apply(tape, store, p.w1, nodes), apply(tape, store, p.w2, question));
    return ad::softmax(attention_scores(tape, store, p.w_a, hidden));
}

EdgeAttention edge_attention(const ad::ParamStore& store, const IntraModalParams& p, ad::Var nodes,
                             ad::Var edge_features, const EdgeIndex& edges, ad::Var question) {
    ad::Tape& tape = *nodes.tape;
    const auto n = nodes.rows();
    if (edges.size() == 0) throw Error(ErrorCode::kPrecondition, "edge_attention: layer has no edges");
    auto projected = apply(tape, store, p.w5, ad::concat_cols({ad::gather_rows(nodes, edges.src), edge_features}));
    auto centre = apply(tape, store, p.w6, ad::concat_cols({nodes, repeat_row(question, n)}));
    auto hidden = ad::add(apply(tape, store, p.w3, projected), ad::gather_rows(apply(tape, store, p.w4, centre), edges.dst));
    auto scores = attention_scores(tape, store, p.w_b, hidden);
    return {ad::segment_softmax(scores, edges.dst, n), projected};
}

IntraModalResult intra_modal_select(const ad::ParamStore& store, const IntraModalParams& p, ad::Var nodes,
                                    std::optional<ad::Var> edge_features, const EdgeIndex& edges, ad::Var question) {
    ad::Tape& tape = *nodes.tape;
    const auto n = nodes.rows();
    IntraModalResult r;
    r.alpha = node_attention(store, p, nodes, question);
    if (edges.size() > 0) {
        if (!edge_features) throw Error(ErrorCode::kPrecondition, "intra_modal_select: edges without features");
        auto ea = edge_attention(store, p, nodes, *edge_features, edges, question);
        r.beta = ea.beta;
        r.messages = ad::segment_sum(ad::scale_rows(ea.projected, ea.beta), edges.dst, n);
    } else {
        r.messages = tape.zeros(n, store[p.w7.weight].rows());
    }
    r.updated = ad::relu(apply(tape, store, p.w7, ad::concat_cols({r.messages, ad::scale_rows(nodes, r.alpha)})));
    return r;
}

CrossModalResult cross_modal_conv(const ad::ParamStore& store, const CrossModalParams& p,
                                  std::optional<ad::Var> source, ad::Var facts, ad::Var question) {
    ad::Tape& tape = *facts.tape;
    const auto nf = facts.rows();
    CrossModalResult r;
    if (!source) {
        r.messages = tape.zeros(nf, facts.cols());
        return r;
    }
    const auto ns = source->rows();
    std::vector<std::uint32_t> fact_of(nf * ns), source_of(nf * ns);
    for (std::uint32_t i = 0; i < nf; ++i)
        for (std::uint32_t j = 0; j < ns; ++j) {
            fact_of[i * ns + j] = i;
            source_of[i * ns + j] = j;
        }
    auto keys = apply(tape, store, p.w8, *source);
    auto queries = apply(tape, store, p.w9, ad::concat_cols({facts, repeat_row(question, nf)}));
    auto hidden = ad::add(ad::gather_rows(keys, source_of), ad::gather_rows(queries, fact_of));
    auto gamma = ad::segment_softmax(attention_scores(tape, store, p.w_c, hidden), fact_of, nf);
    r.messages = ad::segment_sum(ad::scale_rows(ad::gather_rows(*source, source_of), gamma), fact_of, nf);
    r.gamma = gamma;
    return r;
}

CrossModalResult mean_pool_messages(std::optional<ad::Var> source, ad::Var facts) {
    CrossModalResult r;
    if (!source) {
        r.messages = facts.tape->zeros(facts.rows(), facts.cols());
        return r;
    }
    r.messages = repeat_row(ad::mean_rows(*source), facts.rows());
    return r;
}

GateResult gate_fuse(const ad::ParamStore& store, const GateParams& p, ad::Var m_vf, ad::Var m_sf, ad::Var facts) {
    ad::Tape& tape = *facts.tape;
    auto joined = ad::concat_cols({m_vf, m_sf, facts});
    auto gate = ad::sigmoid(apply(tape, store, p.w10, joined));
    return {apply(tape, store, p.w11, ad::mul(gate, joined)), gate};
}

ad::Var encode_question(ad::Tape& tape, const ModelParams& params, const graph::Question& question) {
    if (question.tokens.size() > params.config.max_question_tokens) {
        throw Error(ErrorCode::kPrecondition, "encode_question: " + std::to_string(question.tokens.size()) +
                                                  " tokens exceed the maximum of " +
                                                  std::to_string(params.config.max_question_tokens));
    }
    return encode_sequence(tape, params.store, params.encoder, question);
}

ForwardResult forward(ad::Tape& tape, const graph::MultiModalGraph& instance, const ModelParams& params,
                      const ForwardOptions& options) {
    const auto& cfg = params.config;
    instance.validate();
    const auto& abl = cfg.ablation;
    const bool use_visual = !abl.drop_visual;
    const bool use_semantic = !abl.drop_semantic;
    if (use_visual) check_layer_dims(instance.visual, cfg.visual_dim, cfg.visual_edge_dim);
    if (use_semantic) check_layer_dims(instance.semantic, cfg.word_dim, cfg.word_dim);
    check_layer_dims(instance.fact, cfg.word_dim, cfg.word_dim);

    const std::size_t steps = options.steps.value_or(cfg.steps);
    if (steps == 0 || steps > params.steps.size()) {
        throw Error(ErrorCode::kInvalidArgument, "forward: " + std::to_string(steps) + " steps requested, " +
                                                     std::to_string(params.steps.size()) + " allocated");
    }

    std::mt19937_64 rng(options.seed);
    const double p_drop = cfg.dropout;
    const auto& store = params.store;

    ForwardResult out;
    out.question = encode_question(tape, params, instance.question);
    const auto q = out.question;

    auto visual = prepare_layer(tape, params, instance.visual, params.input_visual, use_visual);
    auto semantic = prepare_layer(tape, params, instance.semantic, params.input_semantic, use_semantic);
    auto fact = prepare_layer(tape, params, instance.fact, params.input_fact, true);
    ad::Var facts = *fact.nodes;

    for (std::size_t t = 0; t < steps; ++t) {
        const auto& sp = params.steps[t];
        StepTrace trace;
        trace.hidden_dim = cfg.hidden_dim;

        if (visual.nodes) {
            auto r = intra_modal_select(store, sp.visual, *visual.nodes, visual.edge_features, visual.edges, q);
            if (options.record_trace) trace.visual = trace_of(r);
            visual.nodes = ad::dropout(r.updated, p_drop, options.training, rng);
        }
        if (semantic.nodes) {
            auto r = intra_modal_select(store, sp.semantic, *semantic.nodes, semantic.edge_features, semantic.edges, q);
            if (options.record_trace) trace.semantic = trace_of(r);
            semantic.nodes = ad::dropout(r.updated, p_drop, options.training, rng);
        }
        auto fr = intra_modal_select(store, sp.fact, facts, fact.edge_features, fact.edges, q);
        if (options.record_trace) trace.fact = trace_of(fr);
        auto fact_hat = ad::dropout(fr.updated, p_drop, options.training, rng);

        auto vf = abl.concat_visual ? mean_pool_messages(visual.nodes, fact_hat)
                                    : cross_modal_conv(store, sp.visual_to_fact, visual.nodes, fact_hat, q);
        auto sf = abl.concat_semantic ? mean_pool_messages(semantic.nodes, fact_hat)
                                      : cross_modal_conv(store, sp.semantic_to_fact, semantic.nodes, fact_hat, q);
        auto fused = gate_fuse(store, sp.gate, vf.messages, sf.messages, fact_hat);
        auto agg = intra_modal_select(store, sp.aggregate, fused.fused, fact.edge_features, fact.edges, q);
        facts = agg.updated;

        if (options.record_trace) {
            if (vf.gamma) trace.gamma_visual = copy_values(*vf.gamma);
            if (sf.gamma) trace.gamma_semantic = copy_values(*sf.gamma);
            trace.gates = copy_values(fused.gate);
            trace.messages_visual = copy_values(vf.messages);
            trace.messages_semantic = copy_values(sf.messages);
            trace.aggregate = trace_of(agg);
            out.trace.push_back(std::move(trace));
        }
    }

    const auto nf = facts.rows();
    auto x = ad::dropout(ad::concat_cols({facts, repeat_row(q, nf)}), p_drop, options.training, rng);
    auto hidden = ad::relu(apply(tape, store, params.classifier.hidden, x));
    out.probabilities = ad::sigmoid(apply(tape, store, params.classifier.output, hidden));
    out.prediction.probabilities = copy_values(out.probabilities);
    out.prediction.ranking = rank_entities(out.prediction.probabilities);
    return out;
}

Prediction predict(const graph::MultiModalGraph& instance, const ModelParams& params) {
    ad::Tape tape;
    ForwardOptions opts;
    opts.record_trace = false;
    return forward(tape, instance, params, opts).prediction;
}

namespace {

void check_labels(std::span<const double> labels, std::size_t n, double a, double b) {
    if (labels.size() != n) {
        throw Error(ErrorCode::kShapeMismatch, "bce_loss: " + std::to_string(labels.size()) + " labels for " +
                                                   std::to_string(n) + " entities");
    }
    for (double y : labels) {
        if (y != 0.0 && y != 1.0) throw Error(ErrorCode::kInvalidArgument, "bce_loss: label not in {0, 1}");
    }
    if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorCode::kInvalidArgument, "bce_loss: weights must be positive");
}

constexpr double kProbFloor = 1e-12;

}  // namespace

ad::Var bce_loss(ad::Var probabilities, std::span<const double> labels, double a, double b) {
    ad::Tape& tape = *probabilities.tape;
    const auto n = probabilities.rows();
    if (probabilities.cols() != 1) throw Error(ErrorCode::kShapeMismatch, "bce_loss: probabilities must be n x 1");
    check_labels(labels, n, a, b);
    std::vector<double> pos(n), neg(n);
    for (std::size_t i = 0; i < n; ++i) {
        pos[i] = a * labels[i];
        neg[i] = b * (1.0 - labels[i]);
    }
    auto log_p = ad::log(probabilities, kProbFloor);
    auto log_q = ad::log(ad::affine(probabilities, -1.0, 1.0), kProbFloor);
    auto total = ad::add(ad::sum(ad::mul(tape.constant(n, 1, std::move(pos)), log_p)),
                         ad::sum(ad::mul(tape.constant(n, 1, std::move(neg)), log_q)));
    return ad::scale(total, -1.0);
}

double bce_loss(std::span<const double> probabilities, std::span<const double> labels, double a, double b) {
    check_labels(labels, probabilities.size(), a, b);
    double total = 0.0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        const double p = std::clamp(probabilities[i], kProbFloor, 1.0 - kProbFloor);
        total += a * labels[i] * std::log(p) + b * (1.0 - labels[i]) * std::log(1.0 - p);
    }
    return -total;
}

std::vector<std::size_t> rank_entities(std::span<const double> probabilities) {
    std::vector<std::size_t> order(probabilities.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return probabilities[x] > probabilities[y]; });
    return order;
}

std::size_t predict_answer(const Prediction& prediction) {
    if (prediction.probabilities.empty()) throw Error(ErrorCode::kPrecondition, "predict_answer: no entities");
    const auto& p = prediction.probabilities;
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

}  // namespace kgvqa::model
