#include "kgvqa/experiments/harness.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "kgvqa/error.hpp"

namespace kgvqa::experiments {

using nlohmann::json;

std::vector<AblationVariant> standard_ablation_variants() {
    auto v = [](std::string name, bool dv, bool ds, bool cv, bool cs, bool nr) {
        model::AblationFlags f;
        f.drop_visual = dv;
        f.drop_semantic = ds;
        f.concat_visual = cv;
        f.concat_semantic = cs;
        f.no_relations = nr;
        return AblationVariant{std::move(name), f};
    };
    return {v("full model", false, false, false, false, false),
            v("w/o semantic graph", false, true, false, false, false),
            v("w/o visual graph", true, false, false, false, false),
            v("w/o semantic & visual graph", true, true, false, false, false),
            v("S-to-F concat", true, false, false, true, false),
            v("V-to-F concat", false, true, true, false, false),
            v("V-to-F & S-to-F concat", false, false, true, true, false),
            v("w/o relationships", false, false, false, false, true)};
}

RunResult train_and_evaluate(std::span<const graph::Instance> train_set, std::span<const graph::Instance> test_set,
                             const model::ModelConfig& model_config, const train::TrainingConfig& training) {
    auto trained = train::train(train_set, model_config, training);
    return {train::evaluate(test_set, trained.params), std::move(trained.loss_curve)};
}

namespace {

void say(const Progress& p, const std::string& msg) {
    if (p) p(msg);
}

json run_json(const RunResult& r) {
    return {{"top1", r.report.top1},
            {"top3", r.report.top3},
            {"test_instances", r.report.instances},
            {"final_loss", r.loss_curve.empty() ? 0.0 : r.loss_curve.back()}};
}

json header(const std::string& kind) { return {{"format_version", kReportFormatVersion}, {"kind", kind}}; }

std::string pct(double x) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(2) << 100.0 * x;
    return ss.str();
}

}  // namespace

std::vector<AblationRow> ablation_run(std::span<const graph::Instance> train_set,
                                      std::span<const graph::Instance> test_set, const model::ModelConfig& base,
                                      const train::TrainingConfig& training,
                                      const std::vector<AblationVariant>& variants, const Progress& progress) {
    std::vector<AblationRow> rows;
    for (const auto& v : variants) {
        auto cfg = base;
        cfg.ablation = v.flags;
        say(progress, "ablation: training '" + v.name + "'");
        rows.push_back({v, train_and_evaluate(train_set, test_set, cfg, training)});
    }
    return rows;
}

json ablation_report(const std::vector<AblationRow>& rows) {
    json out = header("ablation_report");
    out["columns"] = {"top1", "top3"};
    json list = json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        json r = run_json(rows[i].result);
        r["index"] = i;
        r["name"] = rows[i].variant.name;
        r["flags"] = rows[i].variant.flags;
        list.push_back(std::move(r));
    }
    out["rows"] = std::move(list);
    return out;
}

std::vector<StepsRow> steps_sweep(std::span<const graph::Instance> train_set, std::span<const graph::Instance> test_set,
                                  const model::ModelConfig& base, const train::TrainingConfig& training,
                                  const std::vector<std::size_t>& steps, const Progress& progress) {
    if (steps.empty()) throw Error(ErrorCode::kInvalidArgument, "steps sweep: no step counts given");
    std::vector<StepsRow> rows;
    for (auto t : steps) {
        auto cfg = base;
        cfg.steps = t;
        say(progress, "steps sweep: training T=" + std::to_string(t));
        rows.push_back({t, train_and_evaluate(train_set, test_set, cfg, training)});
    }
    return rows;
}

json steps_report(const std::vector<StepsRow>& rows) {
    json out = header("steps_sweep");
    json columns = json::array(), top1 = json::array(), top3 = json::array(), results = json::array();
    for (const auto& r : rows) {
        columns.push_back(r.steps);
        top1.push_back(r.result.report.top1);
        top3.push_back(r.result.report.top3);
        json row = run_json(r.result);
        row["steps"] = r.steps;
        results.push_back(std::move(row));
    }
    out["table"] = {{"columns", columns},
                    {"rows", {{{"metric", "top1"}, {"values", top1}}, {{"metric", "top3"}, {"values", top3}}}}};
    out["results"] = std::move(results);
    return out;
}

std::vector<RetrievalRow> retrieval_sweep(const io::Dataset& dataset, const io::Split& split,
                                          const model::ModelConfig& base, const train::TrainingConfig& training,
                                          const RetrievalSweepOptions& options, const Progress& progress) {
    if (options.top_k.empty() || options.top_m.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "retrieval sweep: empty k or m grid");
    }
    if (dataset.header.relations.empty()) {
        throw Error(ErrorCode::kPrecondition, "retrieval sweep: dataset declares no relations");
    }
    say(progress, "retrieval sweep: training relation classifier");
    const auto examples = io::relation_examples(split.train, dataset.embeddings, options.build.max_question_tokens);
    retrieval::RelationClassifier classifier(dataset.header.relations, dataset.embeddings.dim(),
                                             options.classifier_hidden, options.classifier.seed);
    classifier.train(examples, options.classifier);

    std::vector<RetrievalRow> rows;
    for (auto m : options.top_m) {
        for (auto k : options.top_k) {
            auto build = options.build;
            build.retrieval.top_k = k;
            build.retrieval.top_m = m;
            build.retrieval.relation_filter = true;
            auto tr = io::build_instances(dataset, split.train, build, &classifier);
            auto te = io::build_instances(dataset, split.test, build, &classifier);
            std::vector<graph::Instance> usable;
            for (auto& inst : tr.instances)
                if (inst.answer) usable.push_back(std::move(inst));
            if (usable.empty()) {
                throw Error(ErrorCode::kPrecondition, "retrieval sweep: no training answer survives k=" +
                                                          std::to_string(k) + ", m=" + std::to_string(m));
            }
            RetrievalRow row;
            row.top_k = k;
            row.top_m = m;
            row.train_instances = usable.size();
            const auto hits = std::count_if(te.instances.begin(), te.instances.end(),
                                            [](const graph::Instance& i) { return i.answer.has_value(); });
            row.answer_recall =
                te.instances.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(te.instances.size());
            say(progress, "retrieval sweep: training k=" + std::to_string(k) + ", m=" + std::to_string(m));
            row.result = train_and_evaluate(usable, te.instances, base, training);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

json retrieval_report(const std::vector<RetrievalRow>& rows) {
    json out = header("retrieval_sweep");
    std::vector<std::size_t> ks, ms;
    for (const auto& r : rows) {
        if (std::find(ks.begin(), ks.end(), r.top_k) == ks.end()) ks.push_back(r.top_k);
        if (std::find(ms.begin(), ms.end(), r.top_m) == ms.end()) ms.push_back(r.top_m);
    }
    auto find = [&](std::size_t k, std::size_t m) -> const RetrievalRow* {
        for (const auto& r : rows)
            if (r.top_k == k && r.top_m == m) return &r;
        return nullptr;
    };
    json table_rows = json::array();
    for (auto m : ms) {
        for (const char* metric : {"top1", "top3"}) {
            json values = json::array();
            for (auto k : ks) {
                const auto* r = find(k, m);
                if (!r) {
                    values.push_back(nullptr);
                } else {
                    values.push_back(std::string(metric) == "top1" ? r->result.report.top1 : r->result.report.top3);
                }
            }
            table_rows.push_back({{"top_m", m}, {"metric", metric}, {"values", values}});
        }
    }
    out["table"] = {{"columns", ks}, {"rows", table_rows}};
    json results = json::array();
    for (const auto& r : rows) {
        json row = run_json(r.result);
        row["top_k"] = r.top_k;
        row["top_m"] = r.top_m;
        row["answer_recall"] = r.answer_recall;
        row["train_instances"] = r.train_instances;
        results.push_back(std::move(row));
    }
    out["results"] = std::move(results);
    return out;
}

namespace {

std::string pad(std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
}

std::string cell(const json& v) { return v.is_null() ? "-" : pct(v.get<double>()); }

}  // namespace

std::string render_report(const json& report) {
    std::ostringstream out;
    const auto kind = report.value("kind", std::string{});
    if (kind == "ablation_report") {
        out << pad("#", 4) << pad("variant", 32) << pad("top-1", 9) << "top-3\n";
        for (const auto& r : report.at("rows")) {
            out << pad(std::to_string(r.at("index").get<std::size_t>()), 4) << pad(r.at("name"), 32)
                << pad(pct(r.at("top1")), 9) << pct(r.at("top3")) << '\n';
        }
    } else if (kind == "steps_sweep" || kind == "retrieval_sweep") {
        const auto& table = report.at("table");
        const bool steps = kind == "steps_sweep";
        const std::size_t first = steps ? 10 : 16;
        out << pad(steps ? "#steps" : "#facts", first);
        for (const auto& c : table.at("columns")) out << pad((steps ? "" : "@") + c.dump(), 9);
        out << '\n';
        for (const auto& r : table.at("rows")) {
            std::string label = r.at("metric").get<std::string>();
            if (!steps) label = "rel@" + r.at("top_m").dump() + " " + label;
            out << pad(label, first);
            for (const auto& v : r.at("values")) out << pad(cell(v), 9);
            out << '\n';
        }
    } else {
        throw Error(ErrorCode::kInvalidArgument, "render_report: unknown report kind '" + kind + "'");
    }
    return out.str();
}

}  // namespace kgvqa::experiments
