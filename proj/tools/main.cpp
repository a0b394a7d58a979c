#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kgvqa/autodiff/checkpoint.hpp"
#include "kgvqa/error.hpp"
#include "kgvqa/experiments/harness.hpp"
#include "kgvqa/io/dataset.hpp"
#include "kgvqa/io/synthetic.hpp"
#include "kgvqa/io/trace.hpp"
#include "kgvqa/model/network.hpp"
#include "kgvqa/train/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace kgvqa;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string dataset;
    std::string checkpoint;
    std::optional<int> fold;
    bool all_records = false;
    bool quiet = false;
    bool per_instance = false;

    // gen
    std::optional<std::size_t> instances;
    std::optional<std::size_t> entities;
    std::optional<double> visual_cue;
    std::optional<double> semantic_cue;
    std::string source;

    // train
    std::optional<std::size_t> epochs;

    // predict / trace
    std::vector<std::string> ids;
    std::optional<std::size_t> limit;
    std::size_t top = 3;
    std::size_t top_edges = 2;
    std::size_t top_neighbors = 4;
    bool raw_gates = false;

    // sweep / ablate
    std::vector<std::size_t> steps;
    std::vector<std::size_t> top_k;
    std::vector<std::size_t> top_m;
    std::vector<std::size_t> variants;
};

[[noreturn]] void usage(const std::string& msg) { throw Error(ErrorCode::kUsage, msg); }

void log(const Options& o, const std::string& msg) {
    if (!o.quiet) std::cerr << msg << '\n';
}

json load_config(const Options& o) {
    if (o.config.empty()) return json::object();
    auto j = io::read_json(o.config);
    if (!j.is_object()) throw Error(ErrorCode::kSchema, o.config + ": config must be a JSON object");
    return j;
}

template <class T>
T layered(const T& base, const json& config, const char* section) {
    json j = base;
    if (config.contains(section)) j.merge_patch(config.at(section));
    try {
        return j.get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kSchema, std::string("config section '") + section + "': " + e.what());
    }
}

model::ModelConfig model_config(const json& config, const io::Dataset& ds) {
    auto base = model::ModelConfig::desk_scale();
    base.visual_dim = ds.header.visual_dim;
    base.word_dim = ds.header.word_dim;
    auto c = layered(base, config, "model");
    c.validate();
    return c;
}

train::TrainingConfig training_config(const json& config, const Options& o) {
    auto c = layered(train::TrainingConfig{}, config, "training");
    if (o.seed) c.seed = *o.seed;
    if (o.epochs) {
        c.epochs = *o.epochs;
        if (c.warmup_epochs >= c.epochs) c.warmup_epochs = c.epochs > 1 ? 1 : 0;
    }
    c.validate();
    return c;
}

io::RetrievalConfig retrieval_config(const json& config) {
    io::RetrievalConfig r;
    if (!config.contains("retrieval")) return r;
    const auto& j = config.at("retrieval");
    r.top_k = j.value("top_k", r.top_k);
    r.top_m = j.value("top_m", r.top_m);
    r.relation_filter = j.value("relation_filter", r.relation_filter);
    const auto mode = j.value("score_mode", std::string("mean_all_pairs"));
    if (mode == "max_then_mean") {
        r.mode = retrieval::ScoreMode::kMaxThenMean;
    } else if (mode != "mean_all_pairs") {
        throw Error(ErrorCode::kSchema, "config: retrieval.score_mode must be mean_all_pairs or max_then_mean");
    }
    return r;
}

json retrieval_json(const io::RetrievalConfig& r) {
    return {{"top_k", r.top_k},
            {"top_m", r.top_m},
            {"relation_filter", r.relation_filter},
            {"score_mode", r.mode == retrieval::ScoreMode::kMaxThenMean ? "max_then_mean" : "mean_all_pairs"}};
}

io::Dataset need_dataset(const Options& o) {
    if (o.dataset.empty()) usage("--dataset is required");
    return io::load_dataset(o.dataset);
}

bool uses_knowledge_base(const io::Dataset& ds) {
    for (const auto& r : ds.records)
        if (r.source == io::CandidateSource::kKnowledgeBase) return true;
    return false;
}

void emit(const Options& o, const json& doc) {
    if (o.out.empty()) {
        std::cout << doc.dump(2) << '\n';
    } else {
        io::write_json(o.out, doc);
    }
}

// A trained model plus everything needed to rebuild instances the same way.
struct Loaded {
    model::ModelParams params;
    io::BuildOptions build;
    std::optional<retrieval::RelationClassifier> classifier;
    int test_fold = 0;
};

Loaded load_checkpoint(const Options& o) {
    if (o.checkpoint.empty()) usage("--checkpoint is required");
    auto ckpt = ad::read_checkpoint(o.checkpoint);
    const auto& meta = ckpt.at("metadata");
    if (!meta.contains("model")) throw Error(ErrorCode::kSchema, "checkpoint: metadata has no model config");
    Loaded l;
    auto cfg = meta.at("model").get<model::ModelConfig>();
    l.params = model::make_model_params(cfg, 0);
    ad::load_checkpoint_values(ckpt, l.params.store);
    l.build.retrieval = retrieval_config({{"retrieval", meta.value("retrieval", json::object())}});
    if (meta.contains("relation_classifier")) {
        l.classifier = retrieval::RelationClassifier::from_json(meta.at("relation_classifier"));
    }
    l.test_fold = meta.value("test_fold", 0);
    return l;
}

std::vector<io::InstanceRecord> select_records(const Options& o, const io::Dataset& ds, std::optional<int> fold) {
    std::vector<io::InstanceRecord> out;
    for (const auto& r : ds.records) {
        if (!o.ids.empty()) {
            if (std::find(o.ids.begin(), o.ids.end(), r.id) != o.ids.end()) out.push_back(r);
        } else if (!fold || r.fold == *fold) {
            out.push_back(r);
        }
    }
    if (!o.ids.empty() && out.size() != o.ids.size()) usage("some --id values are not in the dataset");
    if (o.limit && out.size() > *o.limit) out.resize(*o.limit);
    return out;
}

std::optional<int> eval_fold(const Options& o, const Loaded& l) {
    if (o.all_records) return std::nullopt;
    return o.fold.value_or(l.test_fold);
}

std::vector<graph::Instance> build(const Options& o, const io::Dataset& ds, const std::vector<io::InstanceRecord>& recs,
                                   const io::BuildOptions& b, const retrieval::RelationClassifier* clf) {
    auto r = io::build_instances(ds, recs, b, clf);
    if (!r.issues.empty()) log(o, std::to_string(r.issues.size()) + " instance(s) lost their answer during retrieval");
    return std::move(r.instances);
}

// ---------------------------------------------------------------------------

int cmd_gen(const Options& o) {
    if (o.out.empty()) usage("gen: --out DIR is required");
    const auto config = load_config(o);
    auto spec = layered(io::SyntheticSpec{}, config, "synthetic");
    if (o.seed) spec.seed = *o.seed;
    if (o.instances) spec.num_instances = *o.instances;
    if (o.entities) spec.entities_per_graph = *o.entities;
    if (o.visual_cue) spec.visual_cue_rate = *o.visual_cue;
    if (o.semantic_cue) spec.semantic_cue_rate = *o.semantic_cue;
    if (o.source == "kb") {
        spec.source = io::CandidateSource::kKnowledgeBase;
    } else if (!o.source.empty() && o.source != "inline") {
        usage("gen: --source must be 'inline' or 'kb'");
    }
    spec.validate();
    auto path = io::write_dataset_files(o.out, io::generate_synthetic(spec));
    std::cout << path.string() << '\n';
    return 0;
}

int cmd_train(const Options& o) {
    if (o.out.empty()) usage("train: --out CHECKPOINT is required");
    const auto config = load_config(o);
    auto ds = need_dataset(o);
    const auto mc = model_config(config, ds);
    const auto tc = training_config(config, o);
    io::BuildOptions b;
    b.retrieval = retrieval_config(config);
    const int fold = o.fold.value_or(0);
    auto split = o.all_records ? io::Split{ds.records, {}} : io::split_by_fold(ds.records, fold);
    if (split.train.empty()) usage("train: no training records outside test fold " + std::to_string(fold));

    std::optional<retrieval::RelationClassifier> clf;
    if (uses_knowledge_base(ds) && b.retrieval.relation_filter && !ds.header.relations.empty()) {
        log(o, "training relation classifier");
        clf.emplace(ds.header.relations, ds.header.word_dim, config.value("relation_classifier_hidden", 32),
                    tc.seed);
        retrieval::RelationClassifier::TrainOptions co;
        co.seed = tc.seed;
        clf->train(io::relation_examples(split.train, ds.embeddings, b.max_question_tokens), co);
    }
    auto all = build(o, ds, split.train, b, clf ? &*clf : nullptr);
    std::vector<graph::Instance> usable;
    for (auto& i : all)
        if (i.answer) usable.push_back(std::move(i));
    if (usable.empty()) throw Error(ErrorCode::kPrecondition, "train: no training instance has its answer among the candidates");

    const auto t0 = std::chrono::steady_clock::now();
    auto result = train::train(usable, mc, tc, [&](const train::EpochStats& s) {
        log(o, "epoch " + std::to_string(s.epoch + 1) + "/" + std::to_string(tc.epochs) +
                   " loss " + std::to_string(s.mean_loss) + " lr " + std::to_string(s.last_lr));
    });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    json meta = {{"model", mc},
                 {"training", tc},
                 {"retrieval", retrieval_json(b.retrieval)},
                 {"test_fold", fold},
                 {"train_instances", usable.size()},
                 {"loss_curve", result.loss_curve},
                 {"seconds", secs}};
    if (clf) meta["relation_classifier"] = clf->to_json();
    ad::save_checkpoint(o.out, result.params.store, meta);

    json summary = {{"format_version", experiments::kReportFormatVersion},
                    {"kind", "train_summary"},
                    {"checkpoint", o.out},
                    {"train_instances", usable.size()},
                    {"loss_curve", result.loss_curve},
                    {"seconds", secs}};
    if (!split.test.empty()) {
        auto test = build(o, ds, split.test, b, clf ? &*clf : nullptr);
        auto report = train::evaluate(test, result.params);
        summary["test"] = {{"fold", fold}, {"instances", report.instances}, {"top1", report.top1}, {"top3", report.top3}};
    }
    std::cout << summary.dump(2) << '\n';
    return 0;
}

int cmd_eval(const Options& o) {
    auto l = load_checkpoint(o);
    auto ds = need_dataset(o);
    auto recs = select_records(o, ds, eval_fold(o, l));
    if (recs.empty()) usage("eval: no records selected");
    auto data = build(o, ds, recs, l.build, l.classifier ? &*l.classifier : nullptr);
    auto report = train::evaluate(data, l.params);
    auto doc = train::to_json(report, o.per_instance);
    emit(o, doc);
    log(o, "top-1 " + std::to_string(report.top1) + "  top-3 " + std::to_string(report.top3) + "  (" +
               std::to_string(report.instances) + " instances)");
    return 0;
}

int cmd_predict(const Options& o) {
    auto l = load_checkpoint(o);
    auto ds = need_dataset(o);
    auto recs = select_records(o, ds, o.ids.empty() ? eval_fold(o, l) : std::nullopt);
    auto data = build(o, ds, recs, l.build, l.classifier ? &*l.classifier : nullptr);
    json list = json::array();
    for (const auto& inst : data) {
        auto p = model::predict(inst.graph, l.params);
        json ranked = json::array();
        for (std::size_t i = 0; i < std::min(o.top, p.ranking.size()); ++i) {
            const auto e = p.ranking[i];
            ranked.push_back({{"entity", inst.entities()[e]}, {"probability", p.probabilities[e]}});
        }
        list.push_back({{"id", inst.id}, {"answer", inst.entities()[model::predict_answer(p)]}, {"ranking", ranked}});
    }
    emit(o, {{"format_version", experiments::kReportFormatVersion}, {"kind", "predictions"}, {"predictions", list}});
    return 0;
}

int cmd_trace(const Options& o) {
    auto l = load_checkpoint(o);
    auto ds = need_dataset(o);
    auto recs = select_records(o, ds, o.ids.empty() ? eval_fold(o, l) : std::nullopt);
    auto data = build(o, ds, recs, l.build, l.classifier ? &*l.classifier : nullptr);
    io::TraceOptions to;
    to.top_edges = o.top_edges;
    to.top_neighbors = o.top_neighbors;
    to.raw_gates = o.raw_gates;
    auto doc = io::export_trace(data, l.params, to);
    auto check = io::check_trace(doc);
    if (check.violations > 0) throw Error(ErrorCode::kNonFinite, "trace: invariant violated: " + check.first_violation);
    emit(o, doc);
    return 0;
}

struct Experiment {
    json config;
    io::Dataset ds;
    model::ModelConfig mc;
    train::TrainingConfig tc;
    io::BuildOptions build;
    io::Split split;
};

Experiment experiment(const Options& o) {
    Experiment e{load_config(o), need_dataset(o), {}, {}, {}, {}};
    e.mc = model_config(e.config, e.ds);
    e.tc = training_config(e.config, o);
    e.build.retrieval = retrieval_config(e.config);
    e.split = io::split_by_fold(e.ds.records, o.fold.value_or(0));
    if (e.split.train.empty() || e.split.test.empty()) usage("the chosen fold leaves an empty train or test split");
    return e;
}

std::vector<graph::Instance> answered(std::vector<graph::Instance> v) {
    std::erase_if(v, [](const graph::Instance& i) { return !i.answer; });
    return v;
}

int cmd_sweep(const Options& o) {
    if (o.steps.empty() && o.top_k.empty() && o.top_m.empty()) usage("sweep: give --steps and/or --top-k/--top-m");
    auto e = experiment(o);
    auto progress = [&](const std::string& m) { log(o, m); };
    json doc = {{"format_version", experiments::kReportFormatVersion}, {"kind", "sweep"}};
    if (!o.steps.empty()) {
        std::optional<retrieval::RelationClassifier> none;
        auto tr = answered(build(o, e.ds, e.split.train, e.build, nullptr));
        auto te = build(o, e.ds, e.split.test, e.build, nullptr);
        auto report = experiments::steps_report(experiments::steps_sweep(tr, te, e.mc, e.tc, o.steps, progress));
        std::cerr << experiments::render_report(report);
        doc["steps"] = std::move(report);
    }
    if (!o.top_k.empty() || !o.top_m.empty()) {
        if (!uses_knowledge_base(e.ds)) usage("sweep: --top-k/--top-m need a knowledge-base dataset");
        experiments::RetrievalSweepOptions ro;
        if (!o.top_k.empty()) ro.top_k = o.top_k;
        if (!o.top_m.empty()) ro.top_m = o.top_m;
        ro.build = e.build;
        ro.classifier.seed = e.tc.seed;
        auto report = experiments::retrieval_report(experiments::retrieval_sweep(e.ds, e.split, e.mc, e.tc, ro, progress));
        std::cerr << experiments::render_report(report);
        doc["retrieval"] = std::move(report);
    }
    emit(o, doc);
    return 0;
}

int cmd_ablate(const Options& o) {
    auto e = experiment(o);
    std::optional<retrieval::RelationClassifier> clf;
    auto all = experiments::standard_ablation_variants();
    std::vector<experiments::AblationVariant> chosen;
    if (o.variants.empty()) {
        chosen = all;
    } else {
        for (auto i : o.variants) {
            if (i >= all.size()) usage("ablate: variant index " + std::to_string(i) + " out of range [0, 7]");
            chosen.push_back(all[i]);
        }
    }
    if (uses_knowledge_base(e.ds) && e.build.retrieval.relation_filter && !e.ds.header.relations.empty()) {
        clf.emplace(e.ds.header.relations, e.ds.header.word_dim, 32, e.tc.seed);
        clf->train(io::relation_examples(e.split.train, e.ds.embeddings, e.build.max_question_tokens), {});
    }
    auto tr = answered(build(o, e.ds, e.split.train, e.build, clf ? &*clf : nullptr));
    auto te = build(o, e.ds, e.split.test, e.build, clf ? &*clf : nullptr);
    auto report = experiments::ablation_report(
        experiments::ablation_run(tr, te, e.mc, e.tc, chosen, [&](const std::string& m) { log(o, m); }));
    std::cerr << experiments::render_report(report);
    emit(o, report);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    Options o;
    CLI::App app{"Multi-layer knowledge reasoning over visual, semantic and fact graphs"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--config", o.config, "JSON config with model/training/retrieval/synthetic sections");
    app.add_option("--seed", o.seed, "Seed for data generation and training");
    app.add_option("--out", o.out, "Output file or directory");
    app.add_option("--dataset", o.dataset, "Dataset .jsonl file");
    app.add_option("--checkpoint", o.checkpoint, "Checkpoint JSON file");
    app.add_flag("--quiet", o.quiet, "No progress output on stderr");

    auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
    gen->add_option("--instances", o.instances);
    gen->add_option("--entities", o.entities, "Entities per fact graph");
    gen->add_option("--visual-cue", o.visual_cue, "Fraction of instances with a visual cue");
    gen->add_option("--semantic-cue", o.semantic_cue, "Fraction of instances with a semantic cue");
    gen->add_option("--source", o.source, "inline or kb");

    auto* tr = app.add_subcommand("train", "Train a model and write a checkpoint");
    tr->add_option("--epochs", o.epochs);
    tr->add_option("--fold", o.fold, "Held-out fold (default 0)");
    tr->add_flag("--all", o.all_records, "Train on every record");

    auto* ev = app.add_subcommand("eval", "Top-k accuracy of a checkpoint");
    ev->add_option("--fold", o.fold, "Fold to evaluate (default: the checkpoint's held-out fold)");
    ev->add_flag("--all", o.all_records, "Evaluate every record");
    ev->add_flag("--per-instance", o.per_instance, "Include ranked predictions per instance");

    auto* pr = app.add_subcommand("predict", "Ranked answers per instance");
    pr->add_option("--id", o.ids, "Instance ids (repeatable)");
    pr->add_option("--fold", o.fold);
    pr->add_flag("--all", o.all_records);
    pr->add_option("--limit", o.limit);
    pr->add_option("--top", o.top, "Entities listed per instance");

    auto* tc = app.add_subcommand("trace", "Export attention weights and gates");
    tc->add_option("--id", o.ids, "Instance ids (repeatable)");
    tc->add_option("--fold", o.fold);
    tc->add_flag("--all", o.all_records);
    tc->add_option("--limit", o.limit);
    tc->add_option("--top-edges", o.top_edges, "Top attended incoming edges per node");
    tc->add_option("--top-neighbors", o.top_neighbors, "Top attended source nodes per entity");
    tc->add_flag("--raw-gates", o.raw_gates, "Write full gate vectors");

    auto* sw = app.add_subcommand("sweep", "Reasoning-step and retrieval grids");
    sw->add_option("--steps", o.steps, "Step counts, e.g. 1,2,3")->delimiter(',');
    sw->add_option("--top-k", o.top_k, "Retrieved fact counts, e.g. 50,100,150,200")->delimiter(',');
    sw->add_option("--top-m", o.top_m, "Relation counts, e.g. 1,3")->delimiter(',');
    sw->add_option("--fold", o.fold);
    sw->add_option("--epochs", o.epochs);

    auto* ab = app.add_subcommand("ablate", "Train and evaluate the structural variants");
    ab->add_option("--variants", o.variants, "Variant indices 0-7 (default all)")->delimiter(',');
    ab->add_option("--fold", o.fold);
    ab->add_option("--epochs", o.epochs);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "E_USAGE: " << msg << " (run with --help for usage)\n";
        return 2;
    }

    try {
        if (*gen) return cmd_gen(o);
        if (*tr) return cmd_train(o);
        if (*ev) return cmd_eval(o);
        if (*pr) return cmd_predict(o);
        if (*tc) return cmd_trace(o);
        if (*sw) return cmd_sweep(o);
        if (*ab) return cmd_ablate(o);
    } catch (const Error& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << error_code_name(e.code()) << ": " << msg << '\n';
        return e.code() == ErrorCode::kUsage ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "E_INTERNAL: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
