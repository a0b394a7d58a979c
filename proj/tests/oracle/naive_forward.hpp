#pragma once

#include <optional>
#include <vector>

#include "kgvqa/graph/types.hpp"
#include "kgvqa/model/params.hpp"

// Dense loop-by-loop re-implementation of the reasoning forward pass, used as
// an oracle for the batched tape implementation. Dropout is always off.
namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

struct LayerOut {
    Vec alpha;
    Vec beta;  // per edge, in edge order
};

struct StepOut {
    LayerOut visual;
    LayerOut semantic;
    LayerOut fact;
    LayerOut aggregate;
    Mat gamma_visual;    // facts x sources
    Mat gamma_semantic;  // facts x sources
    Mat gates;           // facts x 3h
};

struct Result {
    Vec question;
    Vec probabilities;
    std::vector<StepOut> steps;
};

Result naive_forward(const kgvqa::graph::MultiModalGraph& g, const kgvqa::model::ModelParams& params,
                     std::optional<std::size_t> steps = std::nullopt);

}  // namespace oracle
