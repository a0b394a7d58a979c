#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "kgvqa/autodiff/param_store.hpp"
#include "kgvqa/model/config.hpp"
#include "kgvqa/model/encoder.hpp"

namespace kgvqa::model {

/// Question-guided node attention, edge attention and the graph convolution
/// update of one layer.
struct IntraModalParams {
    LinearRef w1;  // node -> attention space
    LinearRef w2;  // question -> attention space
    std::size_t w_a = 0;
    LinearRef w3;  // projected neighbour -> attention space
    LinearRef w4;  // projected centre query -> attention space
    LinearRef w5;  // [neighbour, edge] -> hidden
    LinearRef w6;  // [centre, question] -> hidden
    std::size_t w_b = 0;
    LinearRef w7;  // [message, weighted node] -> hidden
};

/// Attention of every fact entity over the nodes of a source layer.
struct CrossModalParams {
    LinearRef w8;  // source node -> attention space
    LinearRef w9;  // [entity, question] -> attention space
    std::size_t w_c = 0;
};

struct GateParams {
    LinearRef w10;  // 3h -> 3h gate logits
    LinearRef w11;  // 3h -> h fused entity
};

struct StepParams {
    IntraModalParams visual;
    IntraModalParams semantic;
    IntraModalParams fact;
    CrossModalParams visual_to_fact;
    CrossModalParams semantic_to_fact;
    GateParams gate;
    IntraModalParams aggregate;
};

struct ClassifierParams {
    LinearRef hidden;
    LinearRef output;
};

/// Every learned tensor of the network plus index handles into the store.
struct ModelParams {
    ModelConfig config;
    ad::ParamStore store;
    LstmRef encoder;
    LinearRef input_visual;
    LinearRef input_semantic;
    LinearRef input_fact;
    /// One entry per reasoning step; entries alias when weights are shared.
    std::vector<StepParams> steps;
    ClassifierParams classifier;
};

/// Allocates and initializes parameters for the configuration.
ModelParams make_model_params(const ModelConfig& config, std::uint64_t seed);

}  // namespace kgvqa::model
