#include "kgvqa/graph/builders.hpp"

#include <map>
#include <set>
#include <tuple>
#include <unordered_map>

#include "kgvqa/error.hpp"
#include "kgvqa/text.hpp"

namespace kgvqa::graph {

std::string_view layer_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::kVisual: return "visual";
        case LayerKind::kSemantic: return "semantic";
        case LayerKind::kFact: return "fact";
    }
    return "unknown";
}

void BoundingBox::validate() const {
    if (!(w > 0.0) || !(h > 0.0)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "bounding box: width and height must be positive (w=" + std::to_string(w) +
                        ", h=" + std::to_string(h) + ")");
    }
}

std::size_t LayerGraph::add_node(std::string name, std::span<const double> feature) {
    if (node_names.empty() && node_dim == 0) node_dim = feature.size();
    if (feature.size() != node_dim) {
        throw Error(ErrorCode::kShapeMismatch, std::string(layer_name(kind)) + " layer: node feature of length " +
                                                   std::to_string(feature.size()) + ", expected " +
                                                   std::to_string(node_dim));
    }
    node_names.push_back(std::move(name));
    node_features.insert(node_features.end(), feature.begin(), feature.end());
    return node_names.size() - 1;
}

void LayerGraph::add_edge(std::uint32_t src, std::uint32_t dst, std::span<const double> feature, std::string label) {
    if (edge_src.empty() && edge_dim == 0) edge_dim = feature.size();
    if (feature.size() != edge_dim) {
        throw Error(ErrorCode::kShapeMismatch, std::string(layer_name(kind)) + " layer: edge feature of length " +
                                                   std::to_string(feature.size()) + ", expected " +
                                                   std::to_string(edge_dim));
    }
    if (src >= num_nodes() || dst >= num_nodes()) {
        throw Error(ErrorCode::kInvalidArgument, std::string(layer_name(kind)) + " layer: edge endpoint out of range");
    }
    edge_src.push_back(src);
    edge_dst.push_back(dst);
    edge_features.insert(edge_features.end(), feature.begin(), feature.end());
    edge_labels.push_back(std::move(label));
}

void LayerGraph::validate() const {
    const std::string name(layer_name(kind));
    if (node_features.size() != num_nodes() * node_dim) {
        throw Error(ErrorCode::kShapeMismatch, name + " layer: node feature storage does not match node count");
    }
    if (!empty() && node_dim == 0) throw Error(ErrorCode::kShapeMismatch, name + " layer: zero node dimension");
    if (edge_dst.size() != edge_src.size() || edge_labels.size() != edge_src.size() ||
        edge_features.size() != num_edges() * edge_dim) {
        throw Error(ErrorCode::kShapeMismatch, name + " layer: edge storage is inconsistent");
    }
    if (num_edges() > 0 && edge_dim == 0) throw Error(ErrorCode::kShapeMismatch, name + " layer: zero edge dimension");
    for (std::size_t e = 0; e < num_edges(); ++e) {
        if (edge_src[e] >= num_nodes() || edge_dst[e] >= num_nodes()) {
            throw Error(ErrorCode::kInvalidArgument, name + " layer: edge " + std::to_string(e) + " endpoint out of range");
        }
    }
}

void MultiModalGraph::validate() const {
    visual.validate();
    semantic.validate();
    fact.validate();
    if (fact.empty()) throw Error(ErrorCode::kPrecondition, "multimodal graph: fact layer is empty");
    if (question.tokens.empty()) throw Error(ErrorCode::kPrecondition, "multimodal graph: question has no tokens");
    if (question.token_embeddings.size() != question.tokens.size() * question.embedding_dim) {
        throw Error(ErrorCode::kShapeMismatch, "multimodal graph: question embedding storage is inconsistent");
    }
}

std::array<double, kSpatialEdgeDim> spatial_edge_feature(const BoundingBox& bi, const BoundingBox& bj) {
    bi.validate();
    bj.validate();
    return {(bj.x - bi.x) / bi.w, (bj.y - bi.y) / bi.h, bj.w / bi.w, bj.h / bi.h, (bj.w * bj.h) / (bi.w * bi.h)};
}

LayerGraph build_visual_graph(std::span<const VisualNode> objects, const VisualGraphOptions& options) {
    if (objects.empty() && !options.allow_empty) {
        throw Error(ErrorCode::kPrecondition, "build_visual_graph: no objects");
    }
    LayerGraph g;
    g.kind = LayerKind::kVisual;
    g.edge_dim = kSpatialEdgeDim;
    const auto n = std::min(objects.size(), options.max_objects);
    for (std::size_t i = 0; i < n; ++i) {
        objects[i].bbox.validate();
        g.add_node(objects[i].label, objects[i].feature);
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            // Edge j -> i carries r_ji: the geometry of box i relative to box j.
            auto r = spatial_edge_feature(objects[j].bbox, objects[i].bbox);
            g.add_edge(static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(i), r);
        }
    }
    return g;
}

LayerGraph build_semantic_graph(std::span<const SemanticTriple> triples, const EmbeddingTable& table) {
    LayerGraph g;
    g.kind = LayerKind::kSemantic;
    g.node_dim = table.dim();
    g.edge_dim = table.dim();
    std::unordered_map<std::string, std::uint32_t> node_of;
    auto node_for = [&](const std::vector<std::string>& tokens) {
        auto name = join(tokens);
        if (auto it = node_of.find(name); it != node_of.end()) return it->second;
        auto id = static_cast<std::uint32_t>(g.add_node(name, embed_phrase(tokens, table)));
        node_of.emplace(std::move(name), id);
        return id;
    };
    std::set<std::tuple<std::uint32_t, std::string, std::uint32_t>> seen;
    for (const auto& t : triples) {
        const auto s = node_for(t.subject);
        const auto o = node_for(t.object);
        auto rel = join(t.relation);
        if (!seen.emplace(s, rel, o).second) continue;
        const auto r = embed_phrase(t.relation, table);
        g.add_edge(s, o, r, rel);
        g.add_edge(o, s, r, rel);
    }
    return g;
}

LayerGraph build_fact_graph(std::span<const retrieval::FactTriple> facts, const EmbeddingTable& table) {
    if (facts.empty()) throw Error(ErrorCode::kPrecondition, "build_fact_graph: no candidate facts");
    LayerGraph g;
    g.kind = LayerKind::kFact;
    g.node_dim = table.dim();
    g.edge_dim = table.dim();
    auto phrase = [&](const std::string& text) {
        auto tokens = tokenize(text);
        if (tokens.empty()) tokens.push_back(text);
        return embed_phrase(tokens, table);
    };
    std::unordered_map<std::string, std::uint32_t> node_of;
    auto node_for = [&](const std::string& entity) {
        if (auto it = node_of.find(entity); it != node_of.end()) return it->second;
        auto id = static_cast<std::uint32_t>(g.add_node(entity, phrase(entity)));
        node_of.emplace(entity, id);
        return id;
    };
    for (const auto& f : facts) {
        const auto a = node_for(f.e1);
        const auto b = node_for(f.e2);
        const auto r = phrase(f.relation);
        g.add_edge(a, b, r, f.relation);
        g.add_edge(b, a, r, f.relation);
    }
    return g;
}

LayerGraph build_fact_graph(const retrieval::CandidateFactSet& candidates, const EmbeddingTable& table) {
    std::vector<retrieval::FactTriple> facts;
    facts.reserve(candidates.size());
    for (const auto& c : candidates.facts) facts.push_back(c.fact);
    return build_fact_graph(facts, table);
}

Question make_question(std::span<const std::string> tokens, const EmbeddingTable& table, std::size_t max_tokens) {
    if (tokens.empty()) throw Error(ErrorCode::kPrecondition, "question: no tokens");
    if (tokens.size() > max_tokens) {
        throw Error(ErrorCode::kPrecondition, "question: " + std::to_string(tokens.size()) +
                                                  " tokens exceed the maximum of " + std::to_string(max_tokens));
    }
    Question q;
    q.tokens.assign(tokens.begin(), tokens.end());
    q.embedding_dim = table.dim();
    for (const auto& t : tokens) {
        auto v = table.lookup(t);
        q.token_embeddings.insert(q.token_embeddings.end(), v.begin(), v.end());
    }
    return q;
}

}  // namespace kgvqa::graph
