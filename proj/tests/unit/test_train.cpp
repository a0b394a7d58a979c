#include <doctest.h>

#include <cmath>

#include "kgvqa/error.hpp"
#include "kgvqa/io/synthetic.hpp"
#include "kgvqa/train/trainer.hpp"

using namespace kgvqa;
using namespace kgvqa::train;

namespace {

struct Tiny {
    io::Dataset data;
    std::vector<graph::Instance> instances;
    model::ModelConfig config;
};

Tiny tiny(std::size_t n, std::size_t entities = 4) {
    io::SyntheticSpec s;
    s.num_instances = n;
    s.entities_per_graph = entities;
    s.vocabulary = 8;
    s.visual_dim = 6;
    s.word_dim = 6;
    Tiny t{io::generate_synthetic(s), {}, {}};
    t.instances = io::build_instances(t.data, t.data.records, {}).instances;
    t.config = model::ModelConfig::desk_scale();
    t.config.visual_dim = 6;
    t.config.word_dim = 6;
    t.config.hidden_dim = 8;
    t.config.question_dim = 8;
    return t;
}

}  // namespace

TEST_CASE("schedule endpoints and shape") {
    ScheduleConfig c;
    const std::size_t total = 20 * 32;
    CHECK(std::abs(lr_at(0, total, c) - 2e-4) <= 1e-12);
    CHECK(std::abs(lr_at(2 * 32, total, c) - 1e-3) <= 1e-12);
    CHECK(std::abs(lr_at(total - 1, total, c) - 3.6e-4) <= 1e-12);
    // Continuous at the warm-up boundary, non-increasing afterwards.
    CHECK(lr_at(63, total, c) == doctest::Approx(1e-3).epsilon(1e-2));
    for (std::size_t s = 64; s + 1 < total; ++s) CHECK(lr_at(s + 1, total, c) <= lr_at(s, total, c));
    for (std::size_t s = 0; s + 1 < 64; ++s) CHECK(lr_at(s + 1, total, c) > lr_at(s, total, c));
    CHECK_THROWS_AS(lr_at(total, total, c), Error);

    c.per_epoch_annealing = true;
    CHECK(lr_at(64, total, c) == doctest::Approx(1e-3));
    CHECK(lr_at(64, total, c) == lr_at(95, total, c));
    CHECK(std::abs(lr_at(total - 1, total, c) - 3.6e-4) <= 1e-12);
}

TEST_CASE("adam") {
    ad::ParamStore s;
    s.add("x", ad::Tensor({1}, {1.0}, true));
    auto state = AdamState::for_params(s);
    s[0].grad = {0.0};
    adam_step(s, state, 1e-3);
    CHECK(s[0].values[0] == 1.0);

    ad::ParamStore t;
    t.add("x", ad::Tensor({1}, {1.0}, true));
    auto st = AdamState::for_params(t);
    t[0].grad = {1.0};
    adam_step(t, st, 1e-3);
    CHECK(1.0 - t[0].values[0] == doctest::Approx(1e-3).epsilon(1e-6));

    t[0].grad = {NAN};
    try {
        adam_step(t, st, 1e-3);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kNonFinite);
        CHECK(std::string(e.what()).find("'x'") != std::string::npos);
    }
}

TEST_CASE("gradient clipping") {
    ad::ParamStore s;
    s.add("a", ad::Tensor({2}, {0.0, 0.0}, true));
    s[0].grad = {3.0, 4.0};
    CHECK(clip_grad_norm(s, 1.0) == doctest::Approx(5.0));
    CHECK(s[0].grad[0] == doctest::Approx(0.6));
}

TEST_CASE("training config validation and json") {
    TrainingConfig c;
    c.warmup_epochs = 20;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.clip_norm = 2.0;
    c.seed = 9;
    nlohmann::json j = c;
    auto back = j.get<TrainingConfig>();
    CHECK(back.clip_norm == 2.0);
    CHECK(back.seed == 9);
    CHECK_FALSE(back.fixed_lr.has_value());
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
    auto t = tiny(12);
    auto before = model::make_model_params(t.config, 0);
    auto params = before;
    TrainingConfig c;
    c.epochs = 1;
    c.warmup_epochs = 0;
    c.fixed_lr = 0.0;
    auto curve = train_params(params, t.instances, c);
    CHECK(curve.size() == 1);
    for (std::size_t i = 0; i < params.store.size(); ++i) CHECK(params.store[i].values == before.store[i].values);
}

TEST_CASE("training is reproducible and reduces the loss") {
    auto t = tiny(64);
    TrainingConfig c;
    c.epochs = 6;
    c.batch_size = 16;
    c.lr_max = 5e-3;
    c.lr_min = 1e-3;
    c.warmup_epochs = 1;
    auto a = train::train(t.instances, t.config, c);
    auto b = train::train(t.instances, t.config, c);
    CHECK(a.loss_curve == b.loss_curve);
    for (std::size_t i = 0; i < a.params.store.size(); ++i) CHECK(a.params.store[i].values == b.params.store[i].values);
    CHECK(a.loss_curve.front() > a.loss_curve.back());
}

TEST_CASE("training rejects instances without an answer") {
    auto t = tiny(4);
    t.instances[2].answer.reset();
    TrainingConfig c;
    CHECK_THROWS_AS(train::train(t.instances, t.config, c), Error);
}

TEST_CASE("evaluation") {
    auto t = tiny(20);
    auto params = model::make_model_params(t.config, 3);
    auto r = evaluate(t.instances, params, {1, 3, 4});
    CHECK(r.instances == 20);
    CHECK(r.top1 <= r.top3);
    CHECK(r.accuracy_at(4) == 1.0);  // k equals the entity count
    CHECK_THROWS_AS(r.accuracy_at(2), Error);
    auto j = to_json(r, true);
    CHECK(j["format_version"].is_number());
    CHECK(j["predictions"].size() == 20);

    auto forced = tiny(10, 1);
    auto p1 = model::make_model_params(forced.config, 1);
    auto r1 = evaluate(forced.instances, p1);
    CHECK(r1.top1 == 1.0);
    CHECK(r1.top3 == 1.0);

    forced.instances[0].answer.reset();
    CHECK(evaluate(forced.instances, p1).top1 == doctest::Approx(0.9));
}
