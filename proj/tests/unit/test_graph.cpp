#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>

#include "kgvqa/error.hpp"
#include "kgvqa/graph/builders.hpp"
#include "kgvqa/graph/embedding.hpp"

using namespace kgvqa;
using namespace kgvqa::graph;

namespace {

void check_vec(const std::array<double, 5>& got, std::array<double, 5> want) {
    for (std::size_t i = 0; i < 5; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-15));
}

std::vector<VisualNode> objects(std::size_t n) {
    std::vector<VisualNode> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].feature = {static_cast<double>(i), 1.0};
        out[i].bbox = {1.0 * i, 2.0, 3.0 + i, 4.0};
        out[i].label = "obj" + std::to_string(i);
    }
    return out;
}

EmbeddingTable onehot2() {
    EmbeddingTable t(2, OovPolicy::kError);
    t.insert("a", {1.0, 0.0});
    t.insert("b", {0.0, 1.0});
    return t;
}

}  // namespace

TEST_CASE("spatial edge feature") {
    BoundingBox same{3, 4, 5, 6};
    check_vec(spatial_edge_feature(same, same), {0, 0, 1, 1, 1});
    check_vec(spatial_edge_feature({2, 2, 4, 2}, {4, 3, 2, 2}), {0.5, 0.5, 0.5, 1.0, 0.5});
    check_vec(spatial_edge_feature({0, 0, 1, 1}, {1, 0, 2, 2}), {1, 0, 2, 2, 4});
    check_vec(spatial_edge_feature({1, 0, 2, 2}, {0, 0, 1, 1}), {-0.5, 0, 0.5, 0.5, 0.25});
}

TEST_CASE("spatial edge feature is translation and scale invariant") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.5, 50.0);
    for (int trial = 0; trial < 200; ++trial) {
        BoundingBox a{u(rng), u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng), u(rng)};
        // Power-of-two shifts and scales keep the arithmetic exact.
        const double dx = 16.0, dy = -8.0, s = 4.0;
        auto base = spatial_edge_feature(a, b);
        auto moved = spatial_edge_feature({a.x + dx, a.y + dy, a.w, a.h}, {b.x + dx, b.y + dy, b.w, b.h});
        auto scaled = spatial_edge_feature({a.x * s, a.y * s, a.w * s, a.h * s}, {b.x * s, b.y * s, b.w * s, b.h * s});
        for (std::size_t i = 0; i < 5; ++i) {
            CHECK(moved[i] == doctest::Approx(base[i]).epsilon(1e-12));
            CHECK(scaled[i] == base[i]);
        }
    }
}

TEST_CASE("invalid boxes are rejected") {
    CHECK_THROWS_AS(spatial_edge_feature({0, 0, 0, 1}, {0, 0, 1, 1}), Error);
    CHECK_THROWS_AS(spatial_edge_feature({0, 0, 1, 1}, {0, 0, 1, -2}), Error);
}

TEST_CASE("visual graph edge counts") {
    CHECK(build_visual_graph(objects(1)).num_edges() == 0);
    CHECK(build_visual_graph(objects(3)).num_edges() == 6);
    auto g = build_visual_graph(objects(36));
    CHECK(g.num_nodes() == 36);
    CHECK(g.num_edges() == 1260);
    CHECK(build_visual_graph(objects(40)).num_nodes() == 36);
    CHECK_THROWS_AS(build_visual_graph(std::vector<VisualNode>{}), Error);
    CHECK(build_visual_graph(std::vector<VisualNode>{}, {.allow_empty = true}).empty());
}

TEST_CASE("visual graph keeps input order and has no self loops") {
    auto objs = objects(4);
    auto g = build_visual_graph(objs);
    for (std::size_t i = 0; i < 4; ++i) CHECK(g.node_names[i] == objs[i].label);
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
        CHECK(g.edge_src[e] != g.edge_dst[e]);
        auto want = spatial_edge_feature(objs[g.edge_src[e]].bbox, objs[g.edge_dst[e]].bbox);
        for (std::size_t k = 0; k < 5; ++k) CHECK(g.edge(e)[k] == want[k]);
    }
    g.validate();
}

TEST_CASE("embed_phrase") {
    auto t = onehot2();
    std::vector<std::string> one{"a"};
    CHECK(embed_phrase(one, t) == std::vector<double>{1.0, 0.0});
    std::vector<std::string> both{"a", "b"};
    CHECK(embed_phrase(both, t) == std::vector<double>{0.5, 0.5});
    CHECK_THROWS_AS(embed_phrase(std::vector<std::string>{}, t), Error);
    std::vector<std::string> oov{"zzz"};
    CHECK_THROWS_AS(embed_phrase(oov, t), Error);
}

TEST_CASE("hashed embeddings are unit norm and deterministic") {
    auto v = hashed_embedding("hydrant", 16, 3);
    double n = 0.0;
    for (double x : v) n += x * x;
    CHECK(n == doctest::Approx(1.0));
    CHECK(v == hashed_embedding("hydrant", 16, 3));
    CHECK(v != hashed_embedding("hydrant", 16, 4));
    EmbeddingTable zero(4, OovPolicy::kZero);
    CHECK(zero.lookup("x") == std::vector<double>(4, 0.0));
}

TEST_CASE("embedding text round trip") {
    EmbeddingTable t(3);
    t.insert("cat", {0.1, 0.2, 0.3});
    t.insert("dog", {-1.0, 1e-17, 2.5});
    const auto path = std::filesystem::temp_directory_path() / "kgvqa_emb_test.txt";
    t.save_text(path);
    auto back = EmbeddingTable::load_text(path);
    CHECK(back.size() == 2);
    CHECK(back.lookup("dog") == t.lookup("dog"));
    std::filesystem::remove(path);
}

TEST_CASE("semantic graph") {
    auto t = onehot2();
    CHECK(build_semantic_graph(std::vector<SemanticTriple>{}, t).empty());
    std::vector<SemanticTriple> one{{{"a"}, {"b"}, {"b"}}};
    auto g = build_semantic_graph(one, t);
    CHECK(g.num_nodes() == 2);
    CHECK(g.num_edges() == 2);  // one relation, both directions
    std::vector<SemanticTriple> shared{{{"a"}, {"b"}, {"b"}}, {{"a"}, {"a"}, {"a", "b"}}, {{"a"}, {"b"}, {"b"}}};
    auto h = build_semantic_graph(shared, t);
    CHECK(h.num_nodes() == 3);
    CHECK(h.num_edges() == 4);  // duplicate triple collapsed
    CHECK(h.node_names[0] == "a");
}

TEST_CASE("fact graph") {
    EmbeddingTable t(4);
    std::vector<retrieval::FactTriple> one{{"a", "r", "b"}};
    auto g1 = build_fact_graph(one, t);
    CHECK(g1.num_nodes() == 2);
    CHECK(g1.num_edges() == 2);
    std::vector<retrieval::FactTriple> merged{{"a", "r", "b"}, {"a", "s", "c"}};
    auto g2 = build_fact_graph(merged, t);
    CHECK(g2.num_nodes() == 3);
    CHECK(g2.edge_labels == std::vector<std::string>{"r", "r", "s", "s"});
    std::vector<retrieval::FactTriple> parallel{{"a", "r", "b"}, {"a", "s", "b"}};
    CHECK(build_fact_graph(parallel, t).num_edges() == 4);
    CHECK_THROWS_AS(build_fact_graph(std::vector<retrieval::FactTriple>{}, t), Error);
}

TEST_CASE("fact graph node count ignores triple order") {
    EmbeddingTable t(4);
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<retrieval::FactTriple> facts;
        std::set<std::string> names;
        for (int i = 0; i < 12; ++i) {
            auto a = "e" + std::to_string(rng() % 7), b = "e" + std::to_string(rng() % 7);
            names.insert(a);
            names.insert(b);
            facts.push_back({a, "r", b});
        }
        auto n = build_fact_graph(facts, t).num_nodes();
        std::shuffle(facts.begin(), facts.end(), rng);
        CHECK(build_fact_graph(facts, t).num_nodes() == n);
        CHECK(n == names.size());
    }
}

TEST_CASE("question length limit") {
    EmbeddingTable t(2);
    std::vector<std::string> tokens(21, "w");
    CHECK_THROWS_AS(make_question(tokens, t), Error);
    tokens.resize(20);
    CHECK(make_question(tokens, t).token_embeddings.size() == 40);
}
