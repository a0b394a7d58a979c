#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace kgvqa::graph {

inline constexpr int kEmbeddingFormatVersion = 1;

enum class OovPolicy {
    /// Seeded hash of the token mapped to a unit-norm vector.
    kHashed,
    kZero,
    kError,
};

/// Word vectors of a single dimensionality.
class EmbeddingTable {
   public:
    explicit EmbeddingTable(std::size_t dim, OovPolicy policy = OovPolicy::kHashed, std::uint64_t seed = 0);

    void insert(const std::string& token, std::vector<double> vector);
    bool contains(const std::string& token) const { return table_.contains(token); }
    std::vector<double> lookup(const std::string& token) const;

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return table_.size(); }
    OovPolicy policy() const { return policy_; }
    std::uint64_t seed() const { return seed_; }

    /// Plain text: one "token v_1 ... v_d" line per entry. Lines starting with
    /// '#' are comments; a "# format_version N" line is checked when present,
    /// so headerless GloVe files load as-is.
    static EmbeddingTable load_text(const std::filesystem::path& path, OovPolicy policy = OovPolicy::kHashed,
                                    std::uint64_t seed = 0);
    void save_text(const std::filesystem::path& path) const;

   private:
    std::size_t dim_;
    OovPolicy policy_;
    std::uint64_t seed_;
    std::unordered_map<std::string, std::vector<double>> table_;
    std::vector<std::string> order_;
};

/// Deterministic unit-norm pseudo-embedding for a token.
std::vector<double> hashed_embedding(const std::string& token, std::size_t dim, std::uint64_t seed);

/// Mean of the token embeddings. Throws on an empty token list.
std::vector<double> embed_phrase(std::span<const std::string> tokens, const EmbeddingTable& table);

}  // namespace kgvqa::graph
