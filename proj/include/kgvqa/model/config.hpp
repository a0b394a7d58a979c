#pragma once

#include <cstddef>
#include <cstdint>

#include <json.hpp>

namespace kgvqa::model {

/// Structural variants used by the ablation harness.
struct AblationFlags {
    bool drop_visual = false;
    bool drop_semantic = false;
    /// Replace the visual-to-fact convolution by the mean of visual node features.
    bool concat_visual = false;
    /// Replace the semantic-to-fact convolution by the mean of semantic node features.
    bool concat_semantic = false;
    /// Zero every edge feature in all three layers.
    bool no_relations = false;

    bool operator==(const AblationFlags&) const = default;
};

struct ModelConfig {
    std::size_t steps = 2;
    std::size_t visual_dim = 2048;
    std::size_t word_dim = 300;
    std::size_t visual_edge_dim = 5;
    /// Common width every layer is projected to before attention.
    std::size_t hidden_dim = 512;
    std::size_t question_dim = 512;
    /// Hidden width of the answer classifier; 0 means question_dim.
    std::size_t classifier_hidden = 0;
    bool share_weights_across_steps = false;
    bool use_bias = true;
    double dropout = 0.5;
    std::size_t max_question_tokens = 20;
    AblationFlags ablation;

    /// Small sizes for synthetic desk-scale runs (d_v 32, d_w 16, hidden and
    /// question 64, dropout 0.1).
    static ModelConfig desk_scale();

    std::size_t classifier_width() const { return classifier_hidden ? classifier_hidden : question_dim; }
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const AblationFlags& f);
void from_json(const nlohmann::json& j, AblationFlags& f);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace kgvqa::model
