#include <doctest.h>

#include "kgvqa/experiments/harness.hpp"
#include "kgvqa/io/synthetic.hpp"

using namespace kgvqa;

namespace {

model::ModelConfig tiny_model(const io::Dataset& ds) {
    auto c = model::ModelConfig::desk_scale();
    c.visual_dim = ds.header.visual_dim;
    c.word_dim = ds.header.word_dim;
    c.hidden_dim = 6;
    c.question_dim = 6;
    return c;
}

train::TrainingConfig quick() {
    train::TrainingConfig t;
    t.epochs = 1;
    t.warmup_epochs = 0;
    t.batch_size = 8;
    return t;
}

io::SyntheticSpec spec() {
    io::SyntheticSpec s;
    s.num_instances = 20;
    s.entities_per_graph = 4;
    s.vocabulary = 8;
    s.visual_dim = 4;
    s.word_dim = 4;
    return s;
}

}  // namespace

TEST_CASE("standard ablation variants") {
    auto v = experiments::standard_ablation_variants();
    REQUIRE(v.size() == 8);
    CHECK(v[0].flags == model::AblationFlags{});
    CHECK(v[3].flags.drop_visual);
    CHECK(v[3].flags.drop_semantic);
    CHECK(v[4].flags.drop_visual);
    CHECK(v[4].flags.concat_semantic);
    CHECK(v[5].flags.drop_semantic);
    CHECK(v[5].flags.concat_visual);
    CHECK(v[7].flags.no_relations);
}

TEST_CASE("ablation report shape") {
    auto ds = io::generate_synthetic(spec());
    auto split = io::split_by_fold(ds.records, 0);
    auto tr = io::build_instances(ds, split.train, {}).instances;
    auto te = io::build_instances(ds, split.test, {}).instances;
    auto variants = experiments::standard_ablation_variants();
    auto rows = experiments::ablation_run(tr, te, tiny_model(ds), quick(), {variants[0], variants[3]});
    auto j = experiments::ablation_report(rows);
    CHECK(j["kind"] == "ablation_report");
    CHECK(j["rows"].size() == 2);
    CHECK(j["rows"][1]["name"] == "w/o semantic & visual graph");
    CHECK(experiments::render_report(j).find("top-3") != std::string::npos);

    auto plain = experiments::train_and_evaluate(tr, te, tiny_model(ds), quick());
    CHECK(plain.report.top1 == rows[0].result.report.top1);
}

TEST_CASE("steps sweep report is keyed by step count") {
    auto ds = io::generate_synthetic(spec());
    auto split = io::split_by_fold(ds.records, 0);
    auto tr = io::build_instances(ds, split.train, {}).instances;
    auto te = io::build_instances(ds, split.test, {}).instances;
    auto j = experiments::steps_report(experiments::steps_sweep(tr, te, tiny_model(ds), quick(), {1, 2, 3}));
    CHECK(j["table"]["columns"] == nlohmann::json({1, 2, 3}));
    CHECK(j["table"]["rows"].size() == 2);
    CHECK(j["results"].size() == 3);
    CHECK(j["results"][2]["steps"] == 3);
}

TEST_CASE("retrieval sweep grid") {
    auto s = spec();
    s.source = io::CandidateSource::kKnowledgeBase;
    auto ds = io::generate_synthetic(s);
    auto split = io::split_by_fold(ds.records, 0);
    experiments::RetrievalSweepOptions o;
    o.top_k = {5, 20};
    o.top_m = {1, 2};
    o.classifier.epochs = 2;
    o.classifier_hidden = 6;
    auto rows = experiments::retrieval_sweep(ds, split, tiny_model(ds), quick(), o);
    CHECK(rows.size() == 4);
    auto j = experiments::retrieval_report(rows);
    CHECK(j["table"]["columns"] == nlohmann::json({5, 20}));
    CHECK(j["table"]["rows"].size() == 4);
    CHECK(j["table"]["rows"][2]["top_m"] == 2);
    for (const auto& r : j["results"]) CHECK((r["answer_recall"] >= 0.0 && r["answer_recall"] <= 1.0));
    CHECK(experiments::render_report(j).find("rel@2") != std::string::npos);
}
