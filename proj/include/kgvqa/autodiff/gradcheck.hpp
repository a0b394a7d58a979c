#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "kgvqa/autodiff/param_store.hpp"
#include "kgvqa/autodiff/tape.hpp"

namespace kgvqa::ad {

/// Builds a scalar loss on the given tape from the current parameter values.
using LossClosure = std::function<Var(Tape&)>;

struct GradCheckOptions {
    double epsilon = 1e-5;
    /// Coordinates sampled per parameter tensor; 0 checks every coordinate.
    std::size_t samples_per_param = 0;
    std::uint64_t seed = 0;
};

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    std::size_t coordinates_checked = 0;
};

/// Compares reverse-mode gradients with central differences. The error of a
/// coordinate is |analytic - numeric| / max(1, |analytic|, |numeric|).
GradCheckResult gradient_check(const LossClosure& forward, ParamStore& params, const GradCheckOptions& options = {});

}  // namespace kgvqa::ad
