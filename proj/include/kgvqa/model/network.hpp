#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "kgvqa/autodiff/tape.hpp"
#include "kgvqa/graph/types.hpp"
#include "kgvqa/model/params.hpp"

namespace kgvqa::model {

/// Edge list of one layer as seen by the graph operations.
struct EdgeIndex {
    std::vector<std::uint32_t> src;
    std::vector<std::uint32_t> dst;

    std::size_t size() const { return src.size(); }
};

/// alpha_i = softmax_i(w_a . tanh(W1 v_i + W2 q)) over all nodes; n x 1.
ad::Var node_attention(const ad::ParamStore& store, const IntraModalParams& p, ad::Var nodes, ad::Var question);

struct EdgeAttention {
    /// beta_ji per edge (E x 1), normalized over the in-neighbours of each dst.
    ad::Var beta;
    /// v'_j = W5 [v_j, r_ji] per edge (E x h).
    ad::Var projected;
};

/// Requires at least one edge.
EdgeAttention edge_attention(const ad::ParamStore& store, const IntraModalParams& p, ad::Var nodes,
                             ad::Var edge_features, const EdgeIndex& edges, ad::Var question);

struct IntraModalResult {
    ad::Var updated;               // n x h
    ad::Var alpha;                 // n x 1
    std::optional<ad::Var> beta;   // E x 1, absent without edges
    ad::Var messages;              // n x h
};

/// m_i = sum_j beta_ji v'_j; v_hat_i = ReLU(W7 [m_i, alpha_i v_i]), all nodes
/// updated from the pre-update features. Isolated nodes receive m_i = 0.
IntraModalResult intra_modal_select(const ad::ParamStore& store, const IntraModalParams& p, ad::Var nodes,
                                    std::optional<ad::Var> edge_features, const EdgeIndex& edges, ad::Var question);

struct CrossModalResult {
    ad::Var messages;              // facts x h
    std::optional<ad::Var> gamma;  // (facts * sources) x 1, fact-major
};

/// gamma_ji = softmax_j(w_c . tanh(W8 s_j + W9 [f_i, q])); m_i = sum_j gamma_ji s_j.
/// An absent source yields zero messages.
CrossModalResult cross_modal_conv(const ad::ParamStore& store, const CrossModalParams& p,
                                  std::optional<ad::Var> source, ad::Var facts, ad::Var question);

/// Mean of the source nodes repeated for every fact (concatenation ablation).
CrossModalResult mean_pool_messages(std::optional<ad::Var> source, ad::Var facts);

struct GateResult {
    ad::Var fused;  // facts x h
    ad::Var gate;   // facts x 3h
};

/// gate_i = sigmoid(W10 [m_vf, m_sf, f]); fused_i = W11 (gate_i o [m_vf, m_sf, f]).
GateResult gate_fuse(const ad::ParamStore& store, const GateParams& p, ad::Var m_vf, ad::Var m_sf, ad::Var facts);

struct LayerTrace {
    std::vector<double> alpha;
    std::vector<double> beta;
    std::vector<double> messages;
};

/// Attention weights, gates and messages of one reasoning step. Matrices are
/// row-major; gamma matrices are facts x sources.
struct StepTrace {
    std::size_t hidden_dim = 0;
    LayerTrace visual;
    LayerTrace semantic;
    LayerTrace fact;
    LayerTrace aggregate;
    std::vector<double> gamma_visual;
    std::vector<double> gamma_semantic;
    std::vector<double> gates;  // facts x 3h
    std::vector<double> messages_visual;
    std::vector<double> messages_semantic;
};

struct Prediction {
    /// Independent answer probability per fact entity.
    std::vector<double> probabilities;
    /// Entity indices by decreasing probability, ties by lower index.
    std::vector<std::size_t> ranking;
};

struct ForwardOptions {
    bool training = false;
    std::uint64_t seed = 0;
    /// Number of reasoning steps to run; defaults to the configured count.
    std::optional<std::size_t> steps;
    bool record_trace = true;
};

struct ForwardResult {
    ad::Var probabilities;  // facts x 1
    ad::Var question;       // 1 x d_q
    Prediction prediction;
    std::vector<StepTrace> trace;
};

ad::Var encode_question(ad::Tape& tape, const ModelParams& params, const graph::Question& question);

ForwardResult forward(ad::Tape& tape, const graph::MultiModalGraph& instance, const ModelParams& params,
                      const ForwardOptions& options = {});

/// Convenience: forward on a private tape with dropout off.
Prediction predict(const graph::MultiModalGraph& instance, const ModelParams& params);

/// -sum_i [a y_i ln p_i + b (1 - y_i) ln(1 - p_i)], p clamped to [1e-12, 1 - 1e-12].
ad::Var bce_loss(ad::Var probabilities, std::span<const double> labels, double a, double b);
double bce_loss(std::span<const double> probabilities, std::span<const double> labels, double a, double b);

/// Highest probability entity; ties go to the lowest index.
std::size_t predict_answer(const Prediction& prediction);
std::vector<std::size_t> rank_entities(std::span<const double> probabilities);

EdgeIndex edge_index(const graph::LayerGraph& layer);

}  // namespace kgvqa::model
