#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "kgvqa/graph/types.hpp"

namespace kgvqa::graph {

/// A built multimodal graph plus its supervision.
struct Instance {
    std::string id;
    int fold = 0;
    MultiModalGraph graph;
    /// Fact-layer node carrying the ground-truth answer, when it was retrieved.
    std::optional<std::size_t> answer;
    std::string relation;

    const std::vector<std::string>& entities() const { return graph.fact.node_names; }
    /// One-hot answer labels over the fact entities.
    std::vector<double> labels() const;
};

inline std::vector<double> Instance::labels() const {
    std::vector<double> y(graph.fact.num_nodes(), 0.0);
    if (answer) y[*answer] = 1.0;
    return y;
}

}  // namespace kgvqa::graph
