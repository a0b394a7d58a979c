// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kgvqa/autodiff/gradcheck.hpp"
#include "kgvqa/experiments/harness.hpp"
#include "kgvqa/io/dataset.hpp"
#include "kgvqa/io/synthetic.hpp"
#include "kgvqa/io/trace.hpp"
#include "kgvqa/model/network.hpp"
#include "kgvqa/retrieval/retrieval.hpp"
#include "kgvqa/train/trainer.hpp"
#include "oracle/naive_forward.hpp"
#include "support/checks.hpp"
#include "support/random_instance.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace kgvqa;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Context {
    std::string cli;
    fs::path work;
    bool verbose = false;
    json report = json::object();

    // Learnability run, reused by the trace check.
    std::optional<io::Dataset> synthetic;
    std::vector<graph::Instance> train_set, test_set;
    std::optional<model::ModelParams> trained;
    std::vector<double> loss_curve;
    double train_seconds = 0.0;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double chance_sigma(double p, std::size_t n) { return std::sqrt(p * (1.0 - p) / static_cast<double>(n)); }

void note(const Context& c, const std::string& msg) {
    if (c.verbose) std::cerr << "  .. " << msg << std::endl;
}

// 1 --------------------------------------------------------------------------
Outcome gradient_fidelity(Context&) {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    double worst = 0.0;
    std::string worst_param;
    std::size_t coords = 0;
    std::set<std::string> groups;
    for (int trial = 0; trial < 25; ++trial) {
        auto cfg = testsupport::small_config(2);
        auto params = model::make_model_params(cfg, rng());
        auto g = testsupport::random_instance(rng, cfg, {.max_nodes = 6});
        std::vector<double> y(g.fact.num_nodes(), 0.0);
        y[rng() % y.size()] = 1.0;
        ad::LossClosure f = [&](ad::Tape& tape) {
            return model::bce_loss(model::forward(tape, g, params, {.record_trace = false}).probabilities, y, 0.7,
                                   0.3);
        };
        ad::GradCheckOptions o;
        o.samples_per_param = 6;
        o.seed = static_cast<std::uint64_t>(trial);
        auto r = ad::gradient_check(f, params.store, o);
        coords += r.coordinates_checked;
        for (const auto& e : params.store) groups.insert(e.name);
        if (r.max_relative_error > worst) {
            worst = r.max_relative_error;
            worst_param = r.worst_param;
        }
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-3 && secs < 120.0,
            fmt("max rel err %.2e (%s) over %zu coords in %zu tensors, %.1fs", worst, worst_param.c_str(), coords,
                groups.size(), secs)};
}

// 2 --------------------------------------------------------------------------
Outcome oracle_equivalence(Context&) {
    std::mt19937_64 rng(202);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        auto cfg = testsupport::small_config(1 + trial % 3);
        cfg.ablation.concat_visual = trial % 7 == 3;
        cfg.ablation.no_relations = trial % 11 == 5;
        auto params = model::make_model_params(cfg, rng());
        auto g = testsupport::random_instance(rng, cfg, {.allow_empty_context = trial % 4 == 0});
        worst = std::max(worst, testsupport::oracle_gap(g, params));
    }
    return {worst <= 1e-9, fmt("max abs gap %.2e on 100 instances", worst)};
}

// 3 --------------------------------------------------------------------------
Outcome normalization_invariants(Context&) {
    std::mt19937_64 rng(303);
    testsupport::InvariantReport rep;
    for (int trial = 0; trial < 1000; ++trial) {
        auto cfg = testsupport::small_config(1 + trial % 3);
        cfg.ablation.concat_semantic = trial % 9 == 4;
        auto params = model::make_model_params(cfg, rng());
        auto g = testsupport::random_instance(rng, cfg, {.allow_empty_context = trial % 3 == 0});
        ad::Tape tape;
        auto r = model::forward(tape, g, params);
        testsupport::check_trace_invariants(g, r, cfg, 1e-9, rep);
    }
    return {rep.violations == 0 && rep.distributions > 0,
            fmt("%zu distributions, %zu gate components, %zu violations%s%s", rep.distributions, rep.gates,
                rep.violations, rep.violations ? ": " : "", rep.first_violation.c_str())};
}

// 4 --------------------------------------------------------------------------
Outcome permutation_equivariance(Context&) {
    std::mt19937_64 rng(404);
    double worst = 0.0;
    std::size_t answer_moves = 0, ties = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto cfg = testsupport::small_config(1 + trial % 3);
        auto params = model::make_model_params(cfg, rng());
        auto g = testsupport::random_instance(rng, cfg);
        const auto base = model::predict(g, params);
        const auto perm = testsupport::random_permutation(rng, g.fact.num_nodes());
        auto h = g;
        h.fact = testsupport::permute_layer(g.fact, perm);
        h.visual = testsupport::permute_layer(g.visual, testsupport::random_permutation(rng, g.visual.num_nodes()));
        h.semantic =
            testsupport::permute_layer(g.semantic, testsupport::random_permutation(rng, g.semantic.num_nodes()));
        const auto moved = model::predict(h, params);
        for (std::size_t i = 0; i < perm.size(); ++i)
            worst = std::max(worst, std::abs(moved.probabilities[perm[i]] - base.probabilities[i]));
        const auto a = model::predict_answer(base);
        const auto b = model::predict_answer(moved);
        // Entities with bit-identical top scores are indistinguishable; the
        // lowest-index pick among them cannot be permutation invariant.
        std::size_t top = 0;
        for (double p : base.probabilities) top += p == base.probabilities[a];
        if (top > 1) {
            ++ties;
            if (moved.probabilities[b] != base.probabilities[a]) ++answer_moves;
        } else if (b != perm[a] || h.fact.node_names[b] != g.fact.node_names[a]) {
            ++answer_moves;
        }
    }
    return {worst <= 1e-12 && answer_moves == 0,
            fmt("max |p' - p| %.2e, answer changed on %zu/100 (%zu with exactly tied top entities)", worst,
                answer_moves, ties)};
}

// 5 --------------------------------------------------------------------------
void ensure_synthetic(Context& c) {
    if (c.synthetic) return;
    c.synthetic = io::generate_synthetic(io::SyntheticSpec{});
    auto split = io::split_by_fold(c.synthetic->records, 0);
    c.train_set = io::build_instances(*c.synthetic, split.train, {}).instances;
    c.test_set = io::build_instances(*c.synthetic, split.test, {}).instances;
}

model::ModelConfig desk_for(const io::Dataset& ds) {
    auto mc = model::ModelConfig::desk_scale();
    mc.visual_dim = ds.header.visual_dim;
    mc.word_dim = ds.header.word_dim;
    return mc;
}

void ensure_trained(Context& c) {
    ensure_synthetic(c);
    if (c.trained) return;
    const auto mc = desk_for(*c.synthetic);
    const train::TrainingConfig tc;
    const auto t0 = Clock::now();
    auto r = train::train(c.train_set, mc, tc, [&](const train::EpochStats& s) {
        note(c, fmt("epoch %zu loss %.4f", s.epoch + 1, s.mean_loss));
    });
    c.train_seconds = seconds_since(t0);
    c.trained = std::move(r.params);
    c.loss_curve = std::move(r.loss_curve);
}

Outcome learnability(Context& c) {
    ensure_synthetic(c);
    const train::TrainingConfig tc;
    const auto untrained = train::evaluate(c.test_set, model::make_model_params(desk_for(*c.synthetic), tc.seed));
    ensure_trained(c);
    const auto r = train::evaluate(c.test_set, *c.trained);
    const double sigma = chance_sigma(0.125, c.test_set.size());
    const bool chance = std::abs(untrained.top1 - 0.125) <= 3 * sigma;
    const bool sizes = c.train_set.size() == 2000 && c.test_set.size() == 500;
    const bool loss_fell = c.loss_curve.size() == tc.epochs && c.loss_curve.front() > c.loss_curve.back();
    c.report["learnability"] = {{"top1", r.top1},           {"top3", r.top3},
                                {"untrained_top1", untrained.top1}, {"seconds", c.train_seconds},
                                {"loss_curve", c.loss_curve}};
    return {r.top1 >= 0.95 && r.top3 >= 0.99 && c.train_seconds < 600.0 && chance && sizes && loss_fell,
            fmt("top-1 %.3f top-3 %.3f in %.0fs (%zu/%zu); untrained %.3f vs 0.125 +/- %.3f; loss %.3f -> %.3f",
                r.top1, r.top3, c.train_seconds, c.train_set.size(), c.test_set.size(), untrained.top1, 3 * sigma,
                c.loss_curve.front(), c.loss_curve.back())};
}

// 6 --------------------------------------------------------------------------
double run_variant(const io::Dataset& ds, model::AblationFlags flags, std::size_t* test_size = nullptr) {
    auto split = io::split_by_fold(ds.records, 0);
    auto tr = io::build_instances(ds, split.train, {}).instances;
    auto te = io::build_instances(ds, split.test, {}).instances;
    auto mc = desk_for(ds);
    mc.ablation = flags;
    if (test_size) *test_size = te.size();
    return experiments::train_and_evaluate(tr, te, mc, train::TrainingConfig{}).report.top1;
}

Outcome ablation_direction(Context& c) {
    io::SyntheticSpec visual_only;
    visual_only.semantic_cue_rate = 0.0;
    io::SyntheticSpec semantic_only;
    semantic_only.visual_cue_rate = 0.0;
    const auto a = io::generate_synthetic(visual_only);
    const auto b = io::generate_synthetic(semantic_only);
    std::size_t n = 0;
    const double a_full = run_variant(a, {}, &n);
    note(c, fmt("visual-cue set, full model %.3f", a_full));
    const double a_dv = run_variant(a, {.drop_visual = true});
    note(c, fmt("visual-cue set, w/o visual %.3f", a_dv));
    const double b_full = run_variant(b, {});
    note(c, fmt("semantic-cue set, full model %.3f", b_full));
    const double b_ds = run_variant(b, {.drop_semantic = true});
    note(c, fmt("semantic-cue set, w/o semantic %.3f", b_ds));
    const double fact_only = run_variant(a, {.drop_visual = true, .drop_semantic = true});
    note(c, fmt("visual-cue set, fact only %.3f", fact_only));
    const double band = 3 * chance_sigma(0.125, n);
    c.report["ablation"] = {{"visual_cue", {{"full", a_full}, {"drop_visual", a_dv}, {"fact_only", fact_only}}},
                            {"semantic_cue", {{"full", b_full}, {"drop_semantic", b_ds}}}};
    return {a_full - a_dv >= 0.10 && b_full - b_ds >= 0.10 && std::abs(fact_only - 0.125) <= band,
            fmt("visual cue: %.3f vs %.3f w/o visual; semantic cue: %.3f vs %.3f w/o semantic; fact only %.3f "
                "(chance 0.125 +/- %.3f)",
                a_full, a_dv, b_full, b_ds, fact_only, band)};
}

// 7 --------------------------------------------------------------------------
Outcome retrieval_correctness(Context&) {
    std::mt19937_64 rng(707);
    const std::vector<std::string> relations = {"IsA", "UsedFor", "PartOf", "AtLocation", "HasProperty"};
    std::size_t mismatches = 0, cases = 0;
    for (int set = 0; set < 1000; ++set) {
        const std::size_t n = rng() % 160;
        std::vector<retrieval::FactTriple> facts;
        std::map<std::string, double> score;
        for (std::size_t i = 0; i < n; ++i) {
            retrieval::FactTriple f{"e" + std::to_string(i), relations[rng() % relations.size()],
                                    "x" + std::to_string(rng() % 50)};
            // Coarse scores force plenty of ties.
            score[f.e1] = static_cast<double>(rng() % 12) / 4.0 - 1.0;
            facts.push_back(f);
        }
        retrieval::FactScorer scorer = [&](const retrieval::FactTriple& f) { return score.at(f.e1); };
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](auto x, auto y) { return score.at(facts[x].e1) > score.at(facts[y].e1); });
        for (std::size_t k : {1, 10, 100}) {
            ++cases;
            const auto got = retrieval::retrieve_top_k(facts, scorer, k);
            const auto want = std::min(k, n);
            bool ok = got.size() == want;
            for (std::size_t i = 0; ok && i < want; ++i) {
                const auto& s = got.facts[i];
                ok = s.source_index == order[i] && s.fact == facts[order[i]] && s.score == score.at(facts[order[i]].e1);
            }
            if (!ok) ++mismatches;
        }
    }

    std::size_t filter_bad = 0, filter_cases = 0;
    for (int t = 0; t < 500; ++t) {
        retrieval::CandidateFactSet cand;
        const std::size_t n = 1 + rng() % 30;
        for (std::size_t i = 0; i < n; ++i)
            cand.facts.push_back({{"e" + std::to_string(i), relations[rng() % relations.size()], "x"}, 1.0 - 0.01 * i, i});
        cand.k_retained = n;
        retrieval::RelationPrediction pred;
        pred.relations = relations;
        std::shuffle(pred.relations.begin(), pred.relations.end(), rng);
        for (std::size_t i = 0; i < relations.size(); ++i) pred.probabilities.push_back(1.0 / (2.0 + i));
        const std::size_t m = 1 + rng() % relations.size();
        const std::set<std::string> allowed(pred.relations.begin(), pred.relations.begin() + m);
        std::vector<std::size_t> expect;
        for (const auto& f : cand.facts)
            if (allowed.count(f.fact.relation)) expect.push_back(f.source_index);
        ++filter_cases;
        try {
            const auto got = retrieval::filter_by_relation(cand, pred, m);
            std::vector<std::size_t> idx;
            for (const auto& f : got.facts) idx.push_back(f.source_index);
            if (idx != expect || !got.relation_filter_applied) ++filter_bad;
        } catch (const retrieval::EmptyRelationFilter&) {
            if (!expect.empty()) ++filter_bad;
            if (retrieval::filter_by_relation_or_fallback(cand, pred, m).size() != n) ++filter_bad;
        }
    }
    return {mismatches == 0 && filter_bad == 0,
            fmt("top-k: %zu/%zu cases differ from the stable-sort prefix; relation filter: %zu/%zu cases wrong",
                mismatches, cases, filter_bad, filter_cases)};
}

// 8 --------------------------------------------------------------------------
Outcome schedule_endpoints(Context&) {
    const train::TrainingConfig tc;
    const std::size_t steps_per_epoch = (2000 + tc.batch_size - 1) / tc.batch_size;
    const std::size_t total = steps_per_epoch * tc.epochs;
    const std::size_t warm_end = steps_per_epoch * tc.warmup_epochs;
    const double s0 = train::lr_at(0, total, tc);
    const double sw = train::lr_at(warm_end, total, tc);
    const double sl = train::lr_at(total - 1, total, tc);
    const bool ok = std::abs(s0 - 2e-4) <= 1e-12 && std::abs(sw - 1e-3) <= 1e-12 && std::abs(sl - 3.6e-4) <= 1e-12;
    return {ok, fmt("total %zu: lr(0)=%.15g lr(%zu)=%.15g lr(%zu)=%.15g", total, s0, warm_end, sw, total - 1, sl)};
}

// 9 --------------------------------------------------------------------------
bool steps_shape(const json& r, std::string& why) {
    const std::vector<std::size_t> T = {1, 2, 3};
    if (r.value("kind", "") != "steps_sweep" || !r.contains("format_version")) return why = "steps: kind", false;
    const auto& t = r.at("table");
    if (t.at("columns").get<std::vector<std::size_t>>() != T) return why = "steps: columns", false;
    std::vector<std::string> metrics;
    for (const auto& row : t.at("rows")) {
        if (row.at("values").size() != T.size()) return why = "steps: row width", false;
        metrics.push_back(row.at("metric"));
    }
    if (metrics != std::vector<std::string>{"top1", "top3"}) return why = "steps: metrics", false;
    if (r.at("results").size() != T.size()) return why = "steps: results", false;
    for (std::size_t i = 0; i < T.size(); ++i)
        if (r.at("results")[i].at("steps") != T[i]) return why = "steps: result keys", false;
    return true;
}

bool retrieval_shape(const json& r, const std::vector<std::size_t>& ks, const std::vector<std::size_t>& ms,
                     std::string& why) {
    if (r.value("kind", "") != "retrieval_sweep" || !r.contains("format_version")) return why = "retrieval: kind", false;
    const auto& t = r.at("table");
    if (t.at("columns").get<std::vector<std::size_t>>() != ks) return why = "retrieval: columns", false;
    std::set<std::pair<std::size_t, std::string>> rows;
    for (const auto& row : t.at("rows")) {
        if (row.at("values").size() != ks.size()) return why = "retrieval: row width", false;
        rows.insert({row.at("top_m").get<std::size_t>(), row.at("metric").get<std::string>()});
    }
    for (auto m : ms)
        for (const char* metric : {"top1", "top3"})
            if (!rows.count({m, metric})) return why = "retrieval: missing row", false;
    if (rows.size() != 2 * ms.size() || r.at("results").size() != ks.size() * ms.size())
        return why = "retrieval: row count", false;
    return true;
}

int run(const std::string& cmd) {
    const int rc = std::system(cmd.c_str());
    return rc;
}

Outcome sweep_shape(Context& c) {
    const std::vector<std::size_t> ks = {5, 10, 20}, ms = {1, 3};
    json steps, retr;
    std::string how;
    fs::create_directories(c.work);
    if (!c.cli.empty()) {
        how = "via CLI";
        const auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
        const auto inl = c.work / "sweep_inline", kb = c.work / "sweep_kb";
        const auto cli = q(c.cli);
        const std::string quiet = " --quiet > " + q(c.work / "sweep.log") + " 2>&1";
        if (run(cli + " gen --out " + q(inl) + " --instances 200 --seed 9" + quiet) != 0 ||
            run(cli + " gen --out " + q(kb) + " --instances 200 --source kb --seed 9" + quiet) != 0 ||
            run(cli + " sweep --dataset " + q(inl / "dataset.jsonl") + " --steps 1,2,3 --epochs 1 --out " +
                q(c.work / "steps.json") + quiet) != 0 ||
            run(cli + " sweep --dataset " + q(kb / "dataset.jsonl") + " --top-k 5,10,20 --top-m 1,3 --epochs 1 --out " +
                q(c.work / "retrieval.json") + quiet) != 0)
            return {false, "CLI sweep failed, see " + (c.work / "sweep.log").string()};
        steps = io::read_json(c.work / "steps.json").at("steps");
        retr = io::read_json(c.work / "retrieval.json").at("retrieval");
    } else {
        how = "via library (no --cli given)";
        io::SyntheticSpec spec;
        spec.num_instances = 200;
        spec.seed = 9;
        auto ds = io::generate_synthetic(spec);
        auto split = io::split_by_fold(ds.records, 0);
        auto tr = io::build_instances(ds, split.train, {}).instances;
        auto te = io::build_instances(ds, split.test, {}).instances;
        train::TrainingConfig tc;
        tc.epochs = 1;
        tc.warmup_epochs = 0;
        steps = experiments::steps_report(experiments::steps_sweep(tr, te, desk_for(ds), tc, {1, 2, 3}));
        spec.source = io::CandidateSource::kKnowledgeBase;
        auto kb = io::generate_synthetic(spec);
        experiments::RetrievalSweepOptions ro;
        ro.top_k = ks;
        ro.top_m = ms;
        retr = experiments::retrieval_report(
            experiments::retrieval_sweep(kb, io::split_by_fold(kb.records, 0), desk_for(kb), tc, ro));
    }
    std::string why;
    const bool ok = steps_shape(steps, why) && retrieval_shape(retr, ks, ms, why);
    return {ok, ok ? "T in {1,2,3} x {top1,top3}; k in {5,10,20} x m in {1,3} x {top1,top3} " + how
                   : "bad report shape (" + why + ") " + how};
}

// 10 -------------------------------------------------------------------------
Outcome trace_integrity(Context& c) {
    ensure_trained(c);
    std::vector<graph::Instance> sample(c.test_set.begin(), c.test_set.begin() + std::min<std::size_t>(100, c.test_set.size()));
    io::TraceOptions to;
    to.raw_gates = true;
    fs::create_directories(c.work);
    const auto path = c.work / "trace.json";
    io::write_json(path, io::export_trace(sample, *c.trained, to));
    const auto doc = io::read_json(path);
    const auto check = io::check_trace(doc, 1e-9);
    std::size_t mismatched = 0;
    const auto& inst = doc.at("instances");
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const auto expect = model::predict_answer(model::predict(sample[i].graph, *c.trained));
        if (inst[i].at("ranking")[0].at("index").get<std::size_t>() != expect) ++mismatched;
    }
    return {check.instances == sample.size() && check.violations == 0 && mismatched == 0 && sample.size() == 100,
            fmt("%zu instances, %zu distributions, %zu gate values, %zu violations, %zu top-entity mismatches",
                check.instances, check.distributions, check.gate_values, check.violations, mismatched)};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome(Context&)> run;
};

}  // namespace

int main(int argc, char** argv) {
    Context ctx;
    std::vector<int> only;
    std::string report_path;
    std::string work = (fs::temp_directory_path() / "kgvqa_acceptance").string();
    CLI::App app{"Acceptance criteria"};
    app.add_option("--only", only, "Criterion numbers to run (default all)")->delimiter(',');
    app.add_option("--cli", ctx.cli, "Path to the kgvqa executable for the sweep check");
    app.add_option("--out", work, "Scratch directory");
    app.add_option("--report", report_path, "Write a JSON summary here");
    app.add_flag("-v,--verbose", ctx.verbose);
    CLI11_PARSE(app, argc, argv);
    ctx.work = work;

    const std::vector<Criterion> criteria = {
        {1, "gradient fidelity", gradient_fidelity},
        {2, "oracle equivalence", oracle_equivalence},
        {3, "normalization invariants", normalization_invariants},
        {4, "permutation equivariance", permutation_equivariance},
        {5, "learnability", learnability},
        {6, "ablation direction", ablation_direction},
        {7, "retrieval correctness", retrieval_correctness},
        {8, "schedule endpoints", schedule_endpoints},
        {9, "sweep harness shape", sweep_shape},
        {10, "trace integrity", trace_integrity},
    };

    int failed = 0;
    json results = json::array();
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.run(ctx);
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("%s  %2d  %-26s %s  [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
        results.push_back({{"criterion", c.id}, {"name", c.name}, {"pass", o.pass}, {"detail", o.detail}});
    }
    if (!report_path.empty()) {
        io::write_json(report_path, {{"format_version", 1},
                                     {"kind", "acceptance"},
                                     {"criteria", results},
                                     {"measurements", ctx.report}});
    }
    return failed == 0 ? 0 : 1;
}
