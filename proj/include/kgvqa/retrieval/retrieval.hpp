#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgvqa/error.hpp"
#include "kgvqa/graph/embedding.hpp"
#include "kgvqa/retrieval/types.hpp"

namespace kgvqa::retrieval {

enum class ScoreMode {
    /// Mean cosine over every (fact word, context word) pair.
    kMeanAllPairs,
    /// For each fact word take its best context match, then average.
    kMaxThenMean,
};

/// Words of e1, relation and e2 after tokenization.
std::vector<std::string> fact_words(const FactTriple& fact);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Similarity of a fact to the question plus detected visual concepts.
/// The context is the set union of both token lists.
double score_fact(const FactTriple& fact, std::span<const std::string> question_tokens,
                  std::span<const std::string> concept_tokens, const graph::EmbeddingTable& table,
                  ScoreMode mode = ScoreMode::kMeanAllPairs);

/// score_fact with the context embedded once and word vectors cached, for
/// scoring a whole knowledge base against one instance.
class ContextScorer {
   public:
    ContextScorer(std::span<const std::string> question_tokens, std::span<const std::string> concept_tokens,
                  const graph::EmbeddingTable& table, ScoreMode mode = ScoreMode::kMeanAllPairs);

    double operator()(const FactTriple& fact) const;

   private:
    const graph::EmbeddingTable* table_;
    ScoreMode mode_;
    std::vector<std::vector<double>> context_;
    mutable std::unordered_map<std::string, std::vector<double>> cache_;
};

using FactScorer = std::function<double(const FactTriple&)>;

/// Highest-scoring k facts; equal scores keep input order.
CandidateFactSet retrieve_top_k(std::span<const FactTriple> facts, const FactScorer& scorer, std::size_t k);

/// Raised when no candidate survives the relation filter. Callers are expected
/// to fall back to the unfiltered candidate set.
class EmptyRelationFilter : public Error {
   public:
    EmptyRelationFilter()
        : Error(ErrorCode::kPrecondition,
                "filter_by_relation: no candidate matches the predicted relations; fall back to the unfiltered set") {}
};

/// Keeps facts whose relation is among the top-m predicted relations.
CandidateFactSet filter_by_relation(const CandidateFactSet& candidates, const RelationPrediction& prediction,
                                    std::size_t m);

/// filter_by_relation, returning the input unchanged when the filter empties it.
CandidateFactSet filter_by_relation_or_fallback(const CandidateFactSet& candidates,
                                                const RelationPrediction& prediction, std::size_t m);

}  // namespace kgvqa::retrieval
