#include "kgvqa/retrieval/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "kgvqa/text.hpp"

namespace kgvqa::retrieval {

std::vector<std::string> RelationPrediction::top(std::size_t m) const {
    const auto n = std::min(m, relations.size());
    return {relations.begin(), relations.begin() + static_cast<std::ptrdiff_t>(n)};
}

std::vector<std::string> fact_words(const FactTriple& fact) {
    std::vector<std::string> words;
    for (const auto* field : {&fact.e1, &fact.relation, &fact.e2}) {
        auto t = tokenize(*field);
        words.insert(words.end(), t.begin(), t.end());
    }
    return words;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

ContextScorer::ContextScorer(std::span<const std::string> question_tokens,
                             std::span<const std::string> concept_tokens, const graph::EmbeddingTable& table,
                             ScoreMode mode)
    : table_(&table), mode_(mode) {
    std::unordered_set<std::string> seen;
    for (auto list : {question_tokens, concept_tokens}) {
        for (const auto& t : list) {
            if (seen.insert(t).second) context_.push_back(table.lookup(t));
        }
    }
    if (context_.empty()) throw Error(ErrorCode::kPrecondition, "score_fact: empty context");
}

double ContextScorer::operator()(const FactTriple& fact) const {
    const auto words = fact_words(fact);
    if (words.empty()) return 0.0;
    double total = 0.0;
    for (const auto& w : words) {
        auto it = cache_.find(w);
        if (it == cache_.end()) it = cache_.emplace(w, table_->lookup(w)).first;
        const auto& vw = it->second;
        if (mode_ == ScoreMode::kMeanAllPairs) {
            for (const auto& vc : context_) total += cosine_similarity(vw, vc);
        } else {
            double best = -1.0;
            for (const auto& vc : context_) best = std::max(best, cosine_similarity(vw, vc));
            total += best;
        }
    }
    const double pairs = mode_ == ScoreMode::kMeanAllPairs ? static_cast<double>(words.size() * context_.size())
                                                           : static_cast<double>(words.size());
    return total / pairs;
}

double score_fact(const FactTriple& fact, std::span<const std::string> question_tokens,
                  std::span<const std::string> concept_tokens, const graph::EmbeddingTable& table, ScoreMode mode) {
    return ContextScorer(question_tokens, concept_tokens, table, mode)(fact);
}

CandidateFactSet retrieve_top_k(std::span<const FactTriple> facts, const FactScorer& scorer, std::size_t k) {
    if (k == 0) throw Error(ErrorCode::kPrecondition, "retrieve_top_k: k must be at least 1");
    std::vector<double> scores(facts.size());
    for (std::size_t i = 0; i < facts.size(); ++i) scores[i] = scorer(facts[i]);
    std::vector<std::size_t> order(facts.size());
    std::iota(order.begin(), order.end(), 0);
    const auto n = std::min(k, facts.size());
    // Index tie-break makes the partial sort equal to a stable full sort prefix.
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (scores[a] != scores[b]) return scores[a] > scores[b];
                          return a < b;
                      });
    CandidateFactSet out;
    out.k_retained = k;
    out.facts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.facts.push_back({facts[order[i]], scores[order[i]], order[i]});
    return out;
}

CandidateFactSet filter_by_relation(const CandidateFactSet& candidates, const RelationPrediction& prediction,
                                    std::size_t m) {
    if (m == 0) throw Error(ErrorCode::kPrecondition, "filter_by_relation: m must be at least 1");
    const auto top = prediction.top(m);
    const std::unordered_set<std::string> keep(top.begin(), top.end());
    CandidateFactSet out;
    out.k_retained = candidates.k_retained;
    out.relation_filter_applied = true;
    for (const auto& f : candidates.facts) {
        if (keep.contains(f.fact.relation)) out.facts.push_back(f);
    }
    if (out.empty()) throw EmptyRelationFilter();
    return out;
}

CandidateFactSet filter_by_relation_or_fallback(const CandidateFactSet& candidates,
                                                const RelationPrediction& prediction, std::size_t m) {
    try {
        return filter_by_relation(candidates, prediction, m);
    } catch (const EmptyRelationFilter&) {
        return candidates;
    }
}

}  // namespace kgvqa::retrieval
