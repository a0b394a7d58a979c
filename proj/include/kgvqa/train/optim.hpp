#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "kgvqa/autodiff/param_store.hpp"

namespace kgvqa::train {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First and second moment estimates, one slot per parameter tensor.
struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::uint64_t step = 0;

    static AdamState for_params(const ad::ParamStore& params);
};

/// Bias-corrected Adam update using the grads held in the store.
/// Throws naming the parameter when a gradient is not finite.
void adam_step(ad::ParamStore& params, AdamState& state, double lr, const AdamConfig& config = {});

/// Rescales all grads so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(ad::ParamStore& params, double max_norm);

struct ScheduleConfig {
    double lr_max = 1e-3;
    double lr_min = 3.6e-4;
    double warmup_factor = 0.2;
    std::size_t warmup_epochs = 2;
    std::size_t epochs = 20;
    /// Anneal once per epoch instead of once per step.
    bool per_epoch_annealing = false;
};

/// Linear warm-up from warmup_factor * lr_max to lr_max, then cosine
/// annealing to lr_min reached at the final step.
double lr_at(std::size_t step, std::size_t total_steps, const ScheduleConfig& config);

}  // namespace kgvqa::train
