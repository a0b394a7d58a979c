#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "kgvqa/graph/embedding.hpp"
#include "kgvqa/graph/types.hpp"
#include "kgvqa/retrieval/types.hpp"

namespace kgvqa::graph {

inline constexpr std::size_t kDefaultMaxObjects = 36;
inline constexpr std::size_t kSpatialEdgeDim = 5;

/// Relative geometry of box j seen from box i:
/// [(xj-xi)/wi, (yj-yi)/hi, wj/wi, hj/hi, wj*hj/(wi*hi)].
std::array<double, kSpatialEdgeDim> spatial_edge_feature(const BoundingBox& bi, const BoundingBox& bj);

struct VisualGraphOptions {
    std::size_t max_objects = kDefaultMaxObjects;
    bool allow_empty = false;
};

/// Complete directed graph without self loops, nodes in input order.
/// Objects beyond max_objects are dropped.
LayerGraph build_visual_graph(std::span<const VisualNode> objects, const VisualGraphOptions& options = {});

struct SemanticTriple {
    std::vector<std::string> subject;
    std::vector<std::string> relation;
    std::vector<std::string> object;

    bool operator==(const SemanticTriple&) const = default;
};

/// Nodes are distinct subject/object phrases (exact match); each distinct
/// triple becomes a relation stored in both directions.
LayerGraph build_semantic_graph(std::span<const SemanticTriple> triples, const EmbeddingTable& table);

/// One node per distinct entity string; one relation per candidate fact,
/// stored in both directions. Throws when there are no candidates.
LayerGraph build_fact_graph(const retrieval::CandidateFactSet& candidates, const EmbeddingTable& table);
LayerGraph build_fact_graph(std::span<const retrieval::FactTriple> facts, const EmbeddingTable& table);

Question make_question(std::span<const std::string> tokens, const EmbeddingTable& table,
                       std::size_t max_tokens = 20);

}  // namespace kgvqa::graph
