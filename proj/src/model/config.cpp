#include "kgvqa/model/config.hpp"

#include "kgvqa/error.hpp"

namespace kgvqa::model {

ModelConfig ModelConfig::desk_scale() {
    ModelConfig c;
    c.visual_dim = 32;
    c.word_dim = 16;
    c.hidden_dim = 64;
    c.question_dim = 64;
    c.dropout = 0.1;
    return c;
}

void ModelConfig::validate() const {
    if (steps < 1) throw Error(ErrorCode::kInvalidArgument, "model config: steps must be at least 1");
    if (visual_dim == 0 || word_dim == 0 || visual_edge_dim == 0 || hidden_dim == 0 || question_dim == 0) {
        throw Error(ErrorCode::kInvalidArgument, "model config: all dimensions must be positive");
    }
    if (dropout < 0.0 || dropout >= 1.0) throw Error(ErrorCode::kInvalidArgument, "model config: dropout must lie in [0, 1)");
    if (max_question_tokens == 0) throw Error(ErrorCode::kInvalidArgument, "model config: max_question_tokens must be positive");
}

void to_json(nlohmann::json& j, const AblationFlags& f) {
    j = {{"drop_visual", f.drop_visual},
         {"drop_semantic", f.drop_semantic},
         {"concat_visual", f.concat_visual},
         {"concat_semantic", f.concat_semantic},
         {"no_relations", f.no_relations}};
}

void from_json(const nlohmann::json& j, AblationFlags& f) {
    f.drop_visual = j.value("drop_visual", false);
    f.drop_semantic = j.value("drop_semantic", false);
    f.concat_visual = j.value("concat_visual", false);
    f.concat_semantic = j.value("concat_semantic", false);
    f.no_relations = j.value("no_relations", false);
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = {{"steps", c.steps},
         {"visual_dim", c.visual_dim},
         {"word_dim", c.word_dim},
         {"visual_edge_dim", c.visual_edge_dim},
         {"hidden_dim", c.hidden_dim},
         {"question_dim", c.question_dim},
         {"classifier_hidden", c.classifier_hidden},
         {"share_weights_across_steps", c.share_weights_across_steps},
         {"use_bias", c.use_bias},
         {"dropout", c.dropout},
         {"max_question_tokens", c.max_question_tokens},
         {"ablation", c.ablation}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    ModelConfig d;
    c.steps = j.value("steps", d.steps);
    c.visual_dim = j.value("visual_dim", d.visual_dim);
    c.word_dim = j.value("word_dim", d.word_dim);
    c.visual_edge_dim = j.value("visual_edge_dim", d.visual_edge_dim);
    c.hidden_dim = j.value("hidden_dim", d.hidden_dim);
    c.question_dim = j.value("question_dim", d.question_dim);
    c.classifier_hidden = j.value("classifier_hidden", d.classifier_hidden);
    c.share_weights_across_steps = j.value("share_weights_across_steps", d.share_weights_across_steps);
    c.use_bias = j.value("use_bias", d.use_bias);
    c.dropout = j.value("dropout", d.dropout);
    c.max_question_tokens = j.value("max_question_tokens", d.max_question_tokens);
    c.ablation = j.value("ablation", AblationFlags{});
}

}  // namespace kgvqa::model
