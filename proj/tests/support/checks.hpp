#pragma once

#include <cstddef>
#include <string>

#include "kgvqa/graph/types.hpp"
#include "kgvqa/model/network.hpp"

namespace testsupport {

/// Largest absolute gap between the production forward and the naive oracle
/// over probabilities and every recorded attention weight and gate.
double oracle_gap(const kgvqa::graph::MultiModalGraph& g, const kgvqa::model::ModelParams& params);

struct InvariantReport {
    std::size_t distributions = 0;
    std::size_t gates = 0;
    std::size_t violations = 0;
    std::string first_violation;
};

/// Checks every alpha, beta and gamma distribution of the trace sums to one
/// within tol with nonnegative weights, and every gate lies in (0, 1).
void check_trace_invariants(const kgvqa::graph::MultiModalGraph& g, const kgvqa::model::ForwardResult& r,
                            const kgvqa::model::ModelConfig& config, double tol, InvariantReport& report);

}  // namespace testsupport
