#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kgvqa::graph {

enum class LayerKind { kVisual, kSemantic, kFact };

std::string_view layer_name(LayerKind kind);

/// Top-left corner plus width and height, in pixels.
struct BoundingBox {
    double x = 0.0;
    double y = 0.0;
    double w = 1.0;
    double h = 1.0;

    void validate() const;
    bool operator==(const BoundingBox&) const = default;
};

struct VisualNode {
    std::vector<double> feature;
    BoundingBox bbox;
    std::string label;

    bool operator==(const VisualNode&) const = default;
};

/// One layer of the heterogeneous graph. Edges are directed (src -> dst);
/// undirected relations are stored as two directed edges.
struct LayerGraph {
    LayerKind kind = LayerKind::kVisual;
    std::size_t node_dim = 0;
    std::size_t edge_dim = 0;

    std::vector<std::string> node_names;
    std::vector<double> node_features;  // num_nodes x node_dim

    std::vector<std::uint32_t> edge_src;
    std::vector<std::uint32_t> edge_dst;
    std::vector<double> edge_features;  // num_edges x edge_dim
    std::vector<std::string> edge_labels;

    std::size_t num_nodes() const { return node_names.size(); }
    std::size_t num_edges() const { return edge_src.size(); }
    bool empty() const { return node_names.empty(); }

    std::size_t add_node(std::string name, std::span<const double> feature);
    void add_edge(std::uint32_t src, std::uint32_t dst, std::span<const double> feature, std::string label = {});

    std::span<const double> node(std::size_t i) const { return {node_features.data() + i * node_dim, node_dim}; }
    std::span<const double> edge(std::size_t e) const { return {edge_features.data() + e * edge_dim, edge_dim}; }

    /// Checks index ranges and feature dimensionalities.
    void validate() const;
};

struct Question {
    std::vector<std::string> tokens;
    std::size_t embedding_dim = 0;
    std::vector<double> token_embeddings;  // tokens x embedding_dim
};

struct MultiModalGraph {
    LayerGraph visual;
    LayerGraph semantic;
    LayerGraph fact;
    Question question;

    void validate() const;
};

}  // namespace kgvqa::graph
