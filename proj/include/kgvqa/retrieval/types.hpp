#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace kgvqa::retrieval {

/// Knowledge-base fact <e1, relation, e2>.
struct FactTriple {
    std::string e1;
    std::string relation;
    std::string e2;

    bool operator==(const FactTriple&) const = default;
};

struct ScoredFact {
    FactTriple fact;
    double score = 0.0;
    /// Position of the fact in the list it was retrieved from.
    std::size_t source_index = 0;
};

/// Candidate facts ranked by non-increasing score.
struct CandidateFactSet {
    std::vector<ScoredFact> facts;
    std::size_t k_retained = 0;
    bool relation_filter_applied = false;

    std::size_t size() const { return facts.size(); }
    bool empty() const { return facts.empty(); }
};

struct RelationPrediction {
    /// Relation names sorted by non-increasing probability.
    std::vector<std::string> relations;
    std::vector<double> probabilities;

    std::vector<std::string> top(std::size_t m) const;
};

}  // namespace kgvqa::retrieval
