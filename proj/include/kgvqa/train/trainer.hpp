#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgvqa/graph/instance.hpp"
#include "kgvqa/model/network.hpp"
#include "kgvqa/train/optim.hpp"

namespace kgvqa::train {

struct TrainingConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 64;
    double positive_weight = 0.7;
    double negative_weight = 0.3;
    double lr_max = 1e-3;
    double lr_min = 3.6e-4;
    std::size_t warmup_epochs = 2;
    double warmup_factor = 0.2;
    bool per_epoch_annealing = false;
    AdamConfig adam;
    std::uint64_t seed = 0;
    /// Global gradient-norm clip; off when unset.
    std::optional<double> clip_norm;
    /// Overrides the schedule with a constant rate.
    std::optional<double> fixed_lr;

    ScheduleConfig schedule() const;
    void validate() const;
};

void to_json(nlohmann::json& j, const TrainingConfig& c);
void from_json(const nlohmann::json& j, TrainingConfig& c);

double lr_at(std::size_t step, std::size_t total_steps, const TrainingConfig& config);

struct EpochStats {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    double last_lr = 0.0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Mini-batch training of existing parameters in place. Each batch averages
/// the per-instance weighted BCE gradients; returns the mean loss per epoch.
std::vector<double> train_params(model::ModelParams& params, std::span<const graph::Instance> data,
                                 const TrainingConfig& config, const EpochCallback& on_epoch = {});

struct TrainResult {
    model::ModelParams params;
    std::vector<double> loss_curve;
};

/// Initializes parameters from config.seed and trains them.
TrainResult train(std::span<const graph::Instance> data, const model::ModelConfig& model_config,
                  const TrainingConfig& config, const EpochCallback& on_epoch = {});

struct InstanceResult {
    std::string id;
    std::optional<std::size_t> answer;
    std::vector<std::size_t> ranking;
    std::vector<double> probabilities;
};

struct EvalReport {
    std::size_t instances = 0;
    double top1 = 0.0;
    double top3 = 0.0;
    std::vector<std::size_t> ks;
    std::vector<double> top_k;
    std::vector<InstanceResult> results;

    double accuracy_at(std::size_t k) const;
};

/// Top-k accuracy with dropout off. Instances whose answer was not retrieved
/// count as wrong.
EvalReport evaluate(std::span<const graph::Instance> data, const model::ModelParams& params,
                    std::vector<std::size_t> ks = {1, 3});

nlohmann::json to_json(const EvalReport& report, bool include_instances = false);

}  // namespace kgvqa::train
