#include "kgvqa/train/trainer.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "kgvqa/error.hpp"

namespace kgvqa::train {

namespace {

std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

ScheduleConfig TrainingConfig::schedule() const {
    ScheduleConfig s;
    s.lr_max = lr_max;
    s.lr_min = lr_min;
    s.warmup_factor = warmup_factor;
    s.warmup_epochs = warmup_epochs;
    s.epochs = epochs;
    s.per_epoch_annealing = per_epoch_annealing;
    return s;
}

void TrainingConfig::validate() const {
    if (epochs == 0 || batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "training config: epochs and batch size must be positive");
    if (!(lr_max > 0.0) || !(lr_min > 0.0) || !(warmup_factor > 0.0)) {
        throw Error(ErrorCode::kInvalidArgument, "training config: rates must be positive");
    }
    if (warmup_epochs >= epochs) throw Error(ErrorCode::kInvalidArgument, "training config: warm-up epochs must be fewer than epochs");
    if (!(positive_weight > 0.0) || !(negative_weight > 0.0)) {
        throw Error(ErrorCode::kInvalidArgument, "training config: loss weights must be positive");
    }
    if (fixed_lr && *fixed_lr < 0.0) throw Error(ErrorCode::kInvalidArgument, "training config: fixed_lr must be non-negative");
}

void to_json(nlohmann::json& j, const TrainingConfig& c) {
    j = {{"epochs", c.epochs},
         {"batch_size", c.batch_size},
         {"positive_weight", c.positive_weight},
         {"negative_weight", c.negative_weight},
         {"lr_max", c.lr_max},
         {"lr_min", c.lr_min},
         {"warmup_epochs", c.warmup_epochs},
         {"warmup_factor", c.warmup_factor},
         {"per_epoch_annealing", c.per_epoch_annealing},
         {"adam_beta1", c.adam.beta1},
         {"adam_beta2", c.adam.beta2},
         {"adam_epsilon", c.adam.epsilon},
         {"seed", c.seed}};
    if (c.clip_norm) j["clip_norm"] = *c.clip_norm;
    if (c.fixed_lr) j["fixed_lr"] = *c.fixed_lr;
}

void from_json(const nlohmann::json& j, TrainingConfig& c) {
    TrainingConfig d;
    c.epochs = j.value("epochs", d.epochs);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.positive_weight = j.value("positive_weight", d.positive_weight);
    c.negative_weight = j.value("negative_weight", d.negative_weight);
    c.lr_max = j.value("lr_max", d.lr_max);
    c.lr_min = j.value("lr_min", d.lr_min);
    c.warmup_epochs = j.value("warmup_epochs", d.warmup_epochs);
    c.warmup_factor = j.value("warmup_factor", d.warmup_factor);
    c.per_epoch_annealing = j.value("per_epoch_annealing", d.per_epoch_annealing);
    c.adam.beta1 = j.value("adam_beta1", d.adam.beta1);
    c.adam.beta2 = j.value("adam_beta2", d.adam.beta2);
    c.adam.epsilon = j.value("adam_epsilon", d.adam.epsilon);
    c.seed = j.value("seed", d.seed);
    c.clip_norm = j.contains("clip_norm") ? std::optional<double>(j.at("clip_norm").get<double>()) : std::nullopt;
    c.fixed_lr = j.contains("fixed_lr") ? std::optional<double>(j.at("fixed_lr").get<double>()) : std::nullopt;
}

double lr_at(std::size_t step, std::size_t total_steps, const TrainingConfig& config) {
    if (config.fixed_lr) return *config.fixed_lr;
    return lr_at(step, total_steps, config.schedule());
}

std::vector<double> train_params(model::ModelParams& params, std::span<const graph::Instance> data,
                                 const TrainingConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    if (data.empty()) throw Error(ErrorCode::kPrecondition, "train: empty dataset");
    for (const auto& inst : data) {
        if (!inst.answer) throw Error(ErrorCode::kPrecondition, "train: instance '" + inst.id + "' has no answer entity");
    }
    std::vector<std::vector<double>> labels;
    labels.reserve(data.size());
    for (const auto& inst : data) labels.push_back(inst.labels());

    const std::size_t batches = (data.size() + config.batch_size - 1) / config.batch_size;
    const std::size_t total_steps = batches * config.epochs;
    auto state = AdamState::for_params(params.store);
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<double> curve;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        double lr = 0.0;
        for (std::size_t b = 0; b < batches; ++b, ++step) {
            const auto begin = b * config.batch_size;
            const auto end = std::min(data.size(), begin + config.batch_size);
            const double inv = 1.0 / static_cast<double>(end - begin);
            params.store.zero_grad();
            for (std::size_t k = begin; k < end; ++k) {
                const auto idx = order[k];
                ad::Tape tape;
                model::ForwardOptions opts;
                opts.training = true;
                opts.record_trace = false;
                opts.seed = mix(config.seed ^ mix(epoch * 1000003ULL + k));
                auto fwd = model::forward(tape, data[idx].graph, params, opts);
                auto loss = model::bce_loss(fwd.probabilities, labels[idx], config.positive_weight,
                                            config.negative_weight);
                epoch_loss += loss.item();
                tape.backward(loss);
                tape.accumulate_grads(params.store, inv);
            }
            if (config.clip_norm) clip_grad_norm(params.store, *config.clip_norm);
            lr = lr_at(step, total_steps, config);
            adam_step(params.store, state, lr, config.adam);
        }
        curve.push_back(epoch_loss / static_cast<double>(data.size()));
        if (on_epoch) on_epoch({epoch, curve.back(), lr});
    }
    params.store.zero_grad();
    return curve;
}

TrainResult train(std::span<const graph::Instance> data, const model::ModelConfig& model_config,
                  const TrainingConfig& config, const EpochCallback& on_epoch) {
    TrainResult r{model::make_model_params(model_config, config.seed), {}};
    r.loss_curve = train_params(r.params, data, config, on_epoch);
    return r;
}

double EvalReport::accuracy_at(std::size_t k) const {
    for (std::size_t i = 0; i < ks.size(); ++i) {
        if (ks[i] == k) return top_k[i];
    }
    throw Error(ErrorCode::kInvalidArgument, "eval report: no accuracy recorded at k=" + std::to_string(k));
}

EvalReport evaluate(std::span<const graph::Instance> data, const model::ModelParams& params,
                    std::vector<std::size_t> ks) {
    EvalReport report;
    report.instances = data.size();
    for (auto k : {std::size_t{1}, std::size_t{3}}) {
        if (std::find(ks.begin(), ks.end(), k) == ks.end()) ks.push_back(k);
    }
    report.ks = ks;
    std::vector<std::size_t> hits(ks.size(), 0);
    for (const auto& inst : data) {
        auto pred = model::predict(inst.graph, params);
        if (inst.answer) {
            const auto pos = static_cast<std::size_t>(
                std::find(pred.ranking.begin(), pred.ranking.end(), *inst.answer) - pred.ranking.begin());
            for (std::size_t i = 0; i < ks.size(); ++i) {
                if (pos < ks[i]) ++hits[i];
            }
        }
        report.results.push_back({inst.id, inst.answer, std::move(pred.ranking), std::move(pred.probabilities)});
    }
    for (std::size_t i = 0; i < ks.size(); ++i) {
        report.top_k.push_back(data.empty() ? 0.0 : static_cast<double>(hits[i]) / static_cast<double>(data.size()));
    }
    report.top1 = report.accuracy_at(1);
    report.top3 = report.accuracy_at(3);
    return report;
}

nlohmann::json to_json(const EvalReport& report, bool include_instances) {
    nlohmann::json j = {{"format_version", 1},
                        {"kind", "eval_report"},
                        {"instances", report.instances},
                        {"top1", report.top1},
                        {"top3", report.top3}};
    nlohmann::json topk = nlohmann::json::object();
    for (std::size_t i = 0; i < report.ks.size(); ++i) topk[std::to_string(report.ks[i])] = report.top_k[i];
    j["top_k"] = topk;
    if (include_instances) {
        auto arr = nlohmann::json::array();
        for (const auto& r : report.results) {
            arr.push_back({{"id", r.id},
                           {"answer", r.answer ? nlohmann::json(*r.answer) : nlohmann::json(nullptr)},
                           {"ranking", r.ranking},
                           {"probabilities", r.probabilities}});
        }
        j["predictions"] = std::move(arr);
    }
    return j;
}

}  // namespace kgvqa::train
