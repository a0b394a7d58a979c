#include "kgvqa/graph/embedding.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>

#include "kgvqa/error.hpp"

namespace kgvqa::graph {

namespace {

std::uint64_t fnv1a(const std::string& s, std::uint64_t seed) {
    std::uint64_t h = 1469598103934665603ULL ^ (seed * 0x9E3779B97F4A7C15ULL);
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

std::vector<double> hashed_embedding(const std::string& token, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(fnv1a(token, seed));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(dim);
    double norm = 0.0;
    while (norm == 0.0) {
        norm = 0.0;
        for (auto& x : v) {
            x = normal(rng);
            norm += x * x;
        }
    }
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    return v;
}

EmbeddingTable::EmbeddingTable(std::size_t dim, OovPolicy policy, std::uint64_t seed)
    : dim_(dim), policy_(policy), seed_(seed) {
    if (dim == 0) throw Error(ErrorCode::kInvalidArgument, "embedding table: dimension must be positive");
}

void EmbeddingTable::insert(const std::string& token, std::vector<double> vector) {
    if (vector.size() != dim_) {
        throw Error(ErrorCode::kShapeMismatch, "embedding table: vector for '" + token + "' has length " +
                                                   std::to_string(vector.size()) + ", expected " +
                                                   std::to_string(dim_));
    }
    if (!table_.contains(token)) order_.push_back(token);
    table_[token] = std::move(vector);
}

std::vector<double> EmbeddingTable::lookup(const std::string& token) const {
    if (auto it = table_.find(token); it != table_.end()) return it->second;
    switch (policy_) {
        case OovPolicy::kHashed: return hashed_embedding(token, dim_, seed_);
        case OovPolicy::kZero: return std::vector<double>(dim_, 0.0);
        case OovPolicy::kError: break;
    }
    throw Error(ErrorCode::kInvalidArgument, "embedding table: out-of-vocabulary token '" + token + "'");
}

namespace {

// "# format_version N ..." header; other comment lines are ignored.
void check_header(const std::string& line, std::size_t line_no) {
    std::istringstream ss(line.substr(1));
    std::string key;
    int version = 0;
    if (!(ss >> key) || key != "format_version") return;
    if (!(ss >> version) || version != kEmbeddingFormatVersion) {
        throw Error(ErrorCode::kSchema, "embeddings: unsupported format_version on line " + std::to_string(line_no));
    }
}

}  // namespace

EmbeddingTable EmbeddingTable::load_text(const std::filesystem::path& path, OovPolicy policy, std::uint64_t seed) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "embeddings: cannot read " + path.string());
    std::string line;
    std::size_t line_no = 0;
    std::optional<EmbeddingTable> table;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line.starts_with("#")) {
            check_header(line, line_no);
            continue;
        }
        std::istringstream ss(line);
        std::string token;
        ss >> token;
        std::vector<double> v;
        double x;
        while (ss >> x) v.push_back(x);
        if (!ss.eof()) {
            throw Error(ErrorCode::kSchema, "embeddings: malformed number on line " + std::to_string(line_no));
        }
        if (!table) {
            if (v.empty()) throw Error(ErrorCode::kSchema, "embeddings: line 1 has no vector");
            table.emplace(v.size(), policy, seed);
        }
        table->insert(token, std::move(v));
    }
    if (!table) throw Error(ErrorCode::kSchema, "embeddings: empty file " + path.string());
    return std::move(*table);
}

void EmbeddingTable::save_text(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::kIo, "embeddings: cannot write " + path.string());
    out << "# format_version " << kEmbeddingFormatVersion << " dim " << dim_ << '\n';
    out << std::setprecision(17);
    for (const auto& token : order_) {
        out << token;
        for (double x : table_.at(token)) out << ' ' << x;
        out << '\n';
    }
}

std::vector<double> embed_phrase(std::span<const std::string> tokens, const EmbeddingTable& table) {
    if (tokens.empty()) throw Error(ErrorCode::kInvalidArgument, "embed_phrase: empty token list");
    std::vector<double> mean(table.dim(), 0.0);
    for (const auto& t : tokens) {
        auto v = table.lookup(t);
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += v[i];
    }
    for (auto& x : mean) x /= static_cast<double>(tokens.size());
    return mean;
}

}  // namespace kgvqa::graph
