#include "kgvqa/retrieval/relation_classifier.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "kgvqa/autodiff/checkpoint.hpp"
#include "kgvqa/error.hpp"
#include "kgvqa/train/optim.hpp"

namespace kgvqa::retrieval {

RelationClassifier::RelationClassifier(std::vector<std::string> relations, std::size_t word_dim, std::size_t hidden,
                                       std::uint64_t seed, Mode mode)
    : relations_(std::move(relations)), word_dim_(word_dim), hidden_(hidden), seed_(seed), mode_(mode) {
    if (relations_.empty()) throw Error(ErrorCode::kInvalidArgument, "relation classifier: empty relation vocabulary");
    std::mt19937_64 rng(seed);
    encoder_ = model::add_lstm(params_, "relation.lstm", word_dim, hidden, rng);
    head_ = model::add_linear(params_, "relation.head", hidden, relations_.size(), true, rng);
}

std::size_t RelationClassifier::relation_index(const std::string& relation) const {
    auto it = std::find(relations_.begin(), relations_.end(), relation);
    if (it == relations_.end()) {
        throw Error(ErrorCode::kInvalidArgument, "relation classifier: unknown relation '" + relation + "'");
    }
    return static_cast<std::size_t>(it - relations_.begin());
}

RelationPrediction RelationClassifier::predict(const graph::Question& question) const {
    const auto n = relations_.size();
    std::vector<double> probs;
    if (n == 1) {
        probs = {1.0};
    } else if (mode_ == Mode::kPassThrough) {
        probs.assign(n, 1.0 / static_cast<double>(n));
    } else {
        if (!trained_) throw Error(ErrorCode::kPrecondition, "relation classifier: not trained");
        ad::Tape tape;
        auto h = model::encode_sequence(tape, params_, encoder_, question);
        auto p = ad::softmax(model::apply(tape, params_, head_, h));
        auto v = p.values();
        probs.assign(v.begin(), v.end());
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return probs[a] > probs[b]; });
    RelationPrediction out;
    for (auto i : order) {
        out.relations.push_back(relations_[i]);
        out.probabilities.push_back(probs[i]);
    }
    return out;
}

std::vector<double> RelationClassifier::train(std::span<const Example> examples, const TrainOptions& options) {
    if (examples.empty()) throw Error(ErrorCode::kPrecondition, "relation classifier: no training examples");
    std::vector<std::size_t> labels;
    labels.reserve(examples.size());
    for (const auto& e : examples) labels.push_back(relation_index(e.relation));

    auto state = train::AdamState::for_params(params_);
    std::mt19937_64 rng(options.seed);
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> curve;
    const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const auto end = std::min(order.size(), start + batch);
            params_.zero_grad();
            for (std::size_t k = start; k < end; ++k) {
                const auto idx = order[k];
                ad::Tape tape;
                auto h = model::encode_sequence(tape, params_, encoder_, examples[idx].question);
                auto p = ad::softmax(model::apply(tape, params_, head_, h));
                const std::uint32_t row[] = {static_cast<std::uint32_t>(labels[idx])};
                auto loss = ad::scale(ad::log(ad::gather_rows(p, row)), -1.0);
                total += loss.item();
                tape.backward(loss);
                tape.accumulate_grads(params_, 1.0 / static_cast<double>(end - start));
            }
            train::adam_step(params_, state, options.lr);
        }
        curve.push_back(total / static_cast<double>(examples.size()));
    }
    trained_ = true;
    return curve;
}

double RelationClassifier::accuracy(std::span<const Example> examples) const {
    if (examples.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& e : examples) {
        if (predict(e.question).relations.front() == e.relation) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(examples.size());
}

nlohmann::json RelationClassifier::to_json() const {
    return {{"relations", relations_},
            {"word_dim", word_dim_},
            {"hidden", hidden_},
            {"seed", seed_},
            {"mode", mode_ == Mode::kStrict ? "strict" : "pass_through"},
            {"trained", trained_},
            {"params", ad::checkpoint_to_json(params_)}};
}

RelationClassifier RelationClassifier::from_json(const nlohmann::json& j) {
    RelationClassifier c(j.at("relations").get<std::vector<std::string>>(), j.at("word_dim").get<std::size_t>(),
                         j.at("hidden").get<std::size_t>(), j.at("seed").get<std::uint64_t>(),
                         j.at("mode").get<std::string>() == "strict" ? Mode::kStrict : Mode::kPassThrough);
    ad::load_checkpoint_values(j.at("params"), c.params_);
    c.trained_ = j.at("trained").get<bool>();
    return c;
}

}  // namespace kgvqa::retrieval
