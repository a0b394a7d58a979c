#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "kgvqa/error.hpp"
#include "kgvqa/graph/builders.hpp"
#include "kgvqa/retrieval/relation_classifier.hpp"
#include "kgvqa/retrieval/retrieval.hpp"
#include "kgvqa/text.hpp"

using namespace kgvqa;
using namespace kgvqa::retrieval;

namespace {

graph::EmbeddingTable onehot(std::initializer_list<std::string> words) {
    graph::EmbeddingTable t(words.size(), graph::OovPolicy::kError);
    std::size_t i = 0;
    for (const auto& w : words) {
        std::vector<double> v(words.size(), 0.0);
        v[i++] = 1.0;
        t.insert(w, v);
    }
    return t;
}

RelationPrediction prediction(std::vector<std::string> order) {
    RelationPrediction p;
    p.relations = order;
    for (std::size_t i = 0; i < order.size(); ++i) p.probabilities.push_back(1.0 / order.size());
    return p;
}

CandidateFactSet candidates(const std::vector<std::string>& relations) {
    CandidateFactSet c;
    c.k_retained = 100;
    for (std::size_t i = 0; i < relations.size(); ++i)
        c.facts.push_back({{"x" + std::to_string(i), relations[i], "y"}, 1.0 - 0.1 * i, i});
    return c;
}

}  // namespace

TEST_CASE("tokenize") {
    CHECK(tokenize("Fire-Hydrant, RED!") == std::vector<std::string>{"fire", "hydrant", "red"});
    CHECK(tokenize("UsedFor") == std::vector<std::string>{"usedfor"});
}

TEST_CASE("score_fact examples") {
    auto t = onehot({"a", "b", "c", "r"});
    std::vector<std::string> ab{"a", "b"}, none;
    // Fact words {a, b, b}: three of six pairs match.
    CHECK(score_fact({"a", "b", "b"}, ab, none, t) == doctest::Approx(0.5));
    std::vector<std::string> a{"a"};
    CHECK(score_fact({"a", "a", "a"}, a, none, t) == doctest::Approx(1.0));
    std::vector<std::string> c{"c"};
    CHECK(score_fact({"a", "r", "b"}, c, none, t) == 0.0);
    CHECK_THROWS_AS(score_fact({"a", "r", "b"}, none, none, t), Error);
}

TEST_CASE("score_fact uses the union of question and concept tokens") {
    auto t = onehot({"a", "b"});
    std::vector<std::string> qa{"a"}, cb{"b"}, ab{"a", "b"}, ba{"b", "a", "a"};
    const FactTriple f{"a", "b", "b"};
    CHECK(score_fact(f, qa, cb, t) == doctest::Approx(score_fact(f, ab, {}, t)));
    CHECK(score_fact(f, ba, {}, t) == doctest::Approx(score_fact(f, ab, {}, t)));
}

TEST_CASE("max-then-mean scoring") {
    auto t = onehot({"a", "b", "c"});
    std::vector<std::string> ab{"a", "b"};
    CHECK(score_fact({"a", "b", "c"}, ab, {}, t, ScoreMode::kMaxThenMean) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("score_fact is symmetric in context order") {
    graph::EmbeddingTable t(8);
    std::mt19937_64 rng(4);
    std::vector<std::string> ctx{"the", "dog", "runs", "in", "park"};
    const FactTriple f{"dog", "CapableOf", "running fast"};
    const double base = score_fact(f, ctx, {}, t);
    for (int i = 0; i < 20; ++i) {
        std::shuffle(ctx.begin(), ctx.end(), rng);
        CHECK(score_fact(f, ctx, {}, t) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("retrieve_top_k") {
    std::vector<FactTriple> facts{{"a", "r", "0"}, {"b", "r", "1"}, {"c", "r", "2"}};
    std::vector<double> scores{0.9, 0.1, 0.5};
    FactScorer scorer = [&](const FactTriple& f) { return scores[std::stoi(f.e2)]; };
    auto top = retrieve_top_k(facts, scorer, 2);
    REQUIRE(top.size() == 2);
    CHECK(top.facts[0].source_index == 0);
    CHECK(top.facts[1].source_index == 2);
    auto all = retrieve_top_k(facts, scorer, 10);
    CHECK(all.size() == 3);
    CHECK(all.facts[2].source_index == 1);
    CHECK_THROWS_AS(retrieve_top_k(facts, scorer, 0), Error);
}

TEST_CASE("retrieve_top_k equals the stable sort prefix") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng() % 150;
        std::vector<FactTriple> facts(n);
        std::vector<double> scores(n);
        for (std::size_t i = 0; i < n; ++i) {
            facts[i] = {"e", "r", std::to_string(i)};
            scores[i] = static_cast<double>(rng() % 10) / 10.0;  // many ties
        }
        FactScorer scorer = [&](const FactTriple& f) { return scores[std::stoul(f.e2)]; };
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
        for (std::size_t k : {1, 10, 100}) {
            auto top = retrieve_top_k(facts, scorer, k);
            REQUIRE(top.size() == std::min(k, n));
            for (std::size_t i = 0; i < top.size(); ++i) CHECK(top.facts[i].source_index == order[i]);
        }
    }
}

TEST_CASE("filter_by_relation") {
    auto c = candidates({"UsedFor", "IsA", "AtLocation", "UsedFor"});
    auto kept = filter_by_relation(c, prediction({"UsedFor", "IsA", "CapableOf", "AtLocation"}), 3);
    REQUIRE(kept.size() == 3);
    CHECK(kept.facts[0].source_index == 0);
    CHECK(kept.facts[1].source_index == 1);
    CHECK(kept.facts[2].source_index == 3);
    CHECK(kept.relation_filter_applied);

    auto same = filter_by_relation(c, prediction({"AtLocation", "UsedFor", "IsA"}), 3);
    CHECK(same.size() == c.size());

    CHECK_THROWS_AS(filter_by_relation(c, prediction({"PartOf", "HasA"}), 2), EmptyRelationFilter);
    auto fallback = filter_by_relation_or_fallback(c, prediction({"PartOf"}), 1);
    CHECK(fallback.size() == c.size());
    CHECK_FALSE(fallback.relation_filter_applied);
}

TEST_CASE("relation prediction top-m") {
    auto p = prediction({"a", "b", "c"});
    CHECK(p.top(2) == std::vector<std::string>{"a", "b"});
    CHECK(p.top(5).size() == 3);
}

TEST_CASE("relation classifier learns a separable task") {
    graph::EmbeddingTable t(8);
    std::vector<RelationClassifier::Example> train;
    const std::vector<std::pair<std::string, std::string>> templates{
        {"what is the {} used for", "UsedFor"}, {"where can a {} be found", "AtLocation"}, {"what is a {}", "IsA"}};
    for (int i = 0; i < 30; ++i)
        for (const auto& [tpl, rel] : templates) {
            auto text = tpl;
            text.replace(text.find("{}"), 2, "thing" + std::to_string(i % 6));
            auto tokens = tokenize(text);
            train.push_back({graph::make_question(tokens, t), rel});
        }
    RelationClassifier clf({"UsedFor", "AtLocation", "IsA"}, 8, 12, 0);
    CHECK_THROWS_AS(clf.predict(train[0].question), Error);
    RelationClassifier::TrainOptions o;
    o.epochs = 30;
    auto losses = clf.train(train, o);
    CHECK(losses.front() > losses.back());
    CHECK(clf.accuracy(train) >= 0.99);
    auto p = clf.predict(train[1].question);
    CHECK(p.relations[0] == "AtLocation");
    CHECK(std::accumulate(p.probabilities.begin(), p.probabilities.end(), 0.0) == doctest::Approx(1.0));

    auto back = RelationClassifier::from_json(clf.to_json());
    CHECK(back.predict(train[1].question).probabilities == p.probabilities);

    RelationClassifier pass({"UsedFor", "IsA"}, 8, 4, 0, RelationClassifier::Mode::kPassThrough);
    CHECK(pass.predict(train[0].question).probabilities[0] == doctest::Approx(0.5));
}
