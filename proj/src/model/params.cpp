#include "kgvqa/model/params.hpp"

#include <random>
#include <string>

namespace kgvqa::model {

namespace {

IntraModalParams add_intra(ad::ParamStore& s, const std::string& p, std::size_t h, std::size_t edge_dim,
                           std::size_t dq, bool bias, std::mt19937_64& rng) {
    IntraModalParams m;
    m.w1 = add_linear(s, p + ".w1", h, h, bias, rng);
    m.w2 = add_linear(s, p + ".w2", dq, h, bias, rng);
    m.w_a = s.add_uniform(p + ".w_a", {1, h}, h, rng);
    m.w3 = add_linear(s, p + ".w3", h, h, bias, rng);
    m.w4 = add_linear(s, p + ".w4", h, h, bias, rng);
    m.w5 = add_linear(s, p + ".w5", h + edge_dim, h, bias, rng);
    m.w6 = add_linear(s, p + ".w6", h + dq, h, bias, rng);
    m.w_b = s.add_uniform(p + ".w_b", {1, h}, h, rng);
    m.w7 = add_linear(s, p + ".w7", 2 * h, h, bias, rng);
    return m;
}

CrossModalParams add_cross(ad::ParamStore& s, const std::string& p, std::size_t h, std::size_t dq, bool bias,
                           std::mt19937_64& rng) {
    CrossModalParams m;
    m.w8 = add_linear(s, p + ".w8", h, h, bias, rng);
    m.w9 = add_linear(s, p + ".w9", h + dq, h, bias, rng);
    m.w_c = s.add_uniform(p + ".w_c", {1, h}, h, rng);
    return m;
}

StepParams add_step(ad::ParamStore& s, const std::string& p, const ModelConfig& c, std::mt19937_64& rng) {
    const auto h = c.hidden_dim;
    const auto dq = c.question_dim;
    const bool b = c.use_bias;
    StepParams step;
    step.visual = add_intra(s, p + ".visual", h, c.visual_edge_dim, dq, b, rng);
    step.semantic = add_intra(s, p + ".semantic", h, c.word_dim, dq, b, rng);
    step.fact = add_intra(s, p + ".fact", h, c.word_dim, dq, b, rng);
    step.visual_to_fact = add_cross(s, p + ".visual_to_fact", h, dq, b, rng);
    step.semantic_to_fact = add_cross(s, p + ".semantic_to_fact", h, dq, b, rng);
    step.gate.w10 = add_linear(s, p + ".gate.w10", 3 * h, 3 * h, b, rng);
    step.gate.w11 = add_linear(s, p + ".gate.w11", 3 * h, h, b, rng);
    step.aggregate = add_intra(s, p + ".fact_aggregate", h, c.word_dim, dq, b, rng);
    return step;
}

}  // namespace

ModelParams make_model_params(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    ModelParams m;
    m.config = config;
    std::mt19937_64 rng(seed);
    auto& s = m.store;
    const auto h = config.hidden_dim;
    m.encoder = add_lstm(s, "encoder.lstm", config.word_dim, config.question_dim, rng);
    m.input_visual = add_linear(s, "input.visual", config.visual_dim, h, config.use_bias, rng);
    m.input_semantic = add_linear(s, "input.semantic", config.word_dim, h, config.use_bias, rng);
    m.input_fact = add_linear(s, "input.fact", config.word_dim, h, config.use_bias, rng);
    if (config.share_weights_across_steps) {
        auto shared = add_step(s, "shared", config, rng);
        m.steps.assign(config.steps, shared);
    } else {
        for (std::size_t t = 0; t < config.steps; ++t) m.steps.push_back(add_step(s, "step" + std::to_string(t), config, rng));
    }
    const auto ch = config.classifier_width();
    m.classifier.hidden = add_linear(s, "classifier.hidden", h + config.question_dim, ch, config.use_bias, rng);
    m.classifier.output = add_linear(s, "classifier.output", ch, 1, config.use_bias, rng);
    return m;
}

}  // namespace kgvqa::model
