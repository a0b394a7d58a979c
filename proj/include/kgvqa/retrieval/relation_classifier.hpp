#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgvqa/autodiff/param_store.hpp"
#include "kgvqa/graph/types.hpp"
#include "kgvqa/model/encoder.hpp"
#include "kgvqa/retrieval/types.hpp"

namespace kgvqa::retrieval {

/// Predicts the knowledge-base relation a question asks about from the last
/// LSTM hidden state followed by a linear layer and softmax.
class RelationClassifier {
   public:
    enum class Mode {
        /// predict() requires a trained classifier.
        kStrict,
        /// predict() returns the uniform distribution.
        kPassThrough,
    };

    struct Example {
        graph::Question question;
        std::string relation;
    };

    struct TrainOptions {
        std::size_t epochs = 8;
        std::size_t batch_size = 32;
        double lr = 5e-3;
        std::uint64_t seed = 0;
    };

    RelationClassifier(std::vector<std::string> relations, std::size_t word_dim, std::size_t hidden,
                       std::uint64_t seed, Mode mode = Mode::kStrict);

    RelationPrediction predict(const graph::Question& question) const;

    /// Cross-entropy training with Adam. Returns the mean loss per epoch.
    std::vector<double> train(std::span<const Example> examples, const TrainOptions& options);
    /// Fraction of examples whose top-1 relation is correct.
    double accuracy(std::span<const Example> examples) const;

    bool trained() const { return trained_; }
    Mode mode() const { return mode_; }
    const std::vector<std::string>& relations() const { return relations_; }
    const ad::ParamStore& params() const { return params_; }

    nlohmann::json to_json() const;
    static RelationClassifier from_json(const nlohmann::json& j);

   private:
    std::size_t relation_index(const std::string& relation) const;

    std::vector<std::string> relations_;
    std::size_t word_dim_;
    std::size_t hidden_;
    std::uint64_t seed_;
    Mode mode_;
    bool trained_ = false;
    ad::ParamStore params_;
    model::LstmRef encoder_;
    model::LinearRef head_;
};

}  // namespace kgvqa::retrieval
