#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgvqa/graph/instance.hpp"
#include "kgvqa/io/dataset.hpp"
#include "kgvqa/model/config.hpp"
#include "kgvqa/retrieval/relation_classifier.hpp"
#include "kgvqa/train/trainer.hpp"

namespace kgvqa::experiments {

inline constexpr int kReportFormatVersion = 1;

using Progress = std::function<void(const std::string&)>;

struct AblationVariant {
    std::string name;
    model::AblationFlags flags;
};

/// Full model followed by the seven structural variants: without semantic
/// graph, without visual graph, fact graph only, S-to-F concatenation on the
/// visual-free model, V-to-F concatenation on the semantic-free model, both
/// concatenations, and without relation features.
std::vector<AblationVariant> standard_ablation_variants();

struct RunResult {
    train::EvalReport report;
    std::vector<double> loss_curve;
};

/// Trains from config.seed on train and evaluates on test.
RunResult train_and_evaluate(std::span<const graph::Instance> train_set, std::span<const graph::Instance> test_set,
                             const model::ModelConfig& model_config, const train::TrainingConfig& training);

struct AblationRow {
    AblationVariant variant;
    RunResult result;
};

/// Every variant trains with the same seed and data.
std::vector<AblationRow> ablation_run(std::span<const graph::Instance> train_set,
                                      std::span<const graph::Instance> test_set, const model::ModelConfig& base,
                                      const train::TrainingConfig& training,
                                      const std::vector<AblationVariant>& variants, const Progress& progress = {});

nlohmann::json ablation_report(const std::vector<AblationRow>& rows);

struct StepsRow {
    std::size_t steps = 0;
    RunResult result;
};

std::vector<StepsRow> steps_sweep(std::span<const graph::Instance> train_set, std::span<const graph::Instance> test_set,
                                  const model::ModelConfig& base, const train::TrainingConfig& training,
                                  const std::vector<std::size_t>& steps, const Progress& progress = {});

/// Columns are step counts; rows are top-1 and top-3 accuracy.
nlohmann::json steps_report(const std::vector<StepsRow>& rows);

struct RetrievalRow {
    std::size_t top_k = 0;
    std::size_t top_m = 0;
    /// Fraction of test instances whose answer survived retrieval and filtering.
    double answer_recall = 0.0;
    std::size_t train_instances = 0;
    RunResult result;
};

struct RetrievalSweepOptions {
    std::vector<std::size_t> top_k = {50, 100, 150, 200};
    std::vector<std::size_t> top_m = {1, 3};
    io::BuildOptions build;
    retrieval::RelationClassifier::TrainOptions classifier;
    std::size_t classifier_hidden = 32;
};

/// Trains the relation classifier once on the training records, then for
/// every (k, m) rebuilds candidate sets, trains and evaluates. Training
/// instances whose answer was not retrieved are skipped.
std::vector<RetrievalRow> retrieval_sweep(const io::Dataset& dataset, const io::Split& split,
                                          const model::ModelConfig& base, const train::TrainingConfig& training,
                                          const RetrievalSweepOptions& options, const Progress& progress = {});

/// Columns are retrieved-fact counts; one row pair (top-1, top-3) per m.
nlohmann::json retrieval_report(const std::vector<RetrievalRow>& rows);

/// Fixed-width text rendering of any of the reports above.
std::string render_report(const nlohmann::json& report);

}  // namespace kgvqa::experiments
