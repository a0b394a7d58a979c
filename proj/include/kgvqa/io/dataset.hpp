#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgvqa/graph/builders.hpp"
#include "kgvqa/graph/embedding.hpp"
#include "kgvqa/graph/instance.hpp"
#include "kgvqa/retrieval/relation_classifier.hpp"
#include "kgvqa/retrieval/retrieval.hpp"

namespace kgvqa::io {

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr int kKnowledgeBaseFormatVersion = 1;

enum class CandidateSource {
    /// Candidate facts are listed on the record.
    kInline,
    /// Candidates are retrieved from the dataset's knowledge base.
    kKnowledgeBase,
};

struct InstanceRecord {
    std::string id;
    int fold = 0;
    std::vector<std::string> question;
    std::string relation;
    std::vector<graph::VisualNode> objects;
    std::vector<graph::SemanticTriple> captions;
    CandidateSource source = CandidateSource::kInline;
    std::vector<retrieval::FactTriple> facts;
    std::string answer;

    bool operator==(const InstanceRecord&) const = default;
};

/// First line of a dataset file. Sidecar paths are relative to the dataset.
struct DatasetHeader {
    std::vector<std::string> relations;
    std::size_t visual_dim = 0;
    std::size_t word_dim = 0;
    std::string knowledge_base;
    std::string embeddings;

    bool operator==(const DatasetHeader&) const = default;
};

struct ValidationIssue {
    std::string id;
    std::string message;
};

struct Dataset {
    DatasetHeader header;
    std::vector<InstanceRecord> records;
    std::vector<retrieval::FactTriple> knowledge_base;
    graph::EmbeddingTable embeddings{1};
    /// Inline records whose answer is not among their candidate entities.
    std::vector<ValidationIssue> issues;
};

struct LoadOptions {
    graph::OovPolicy oov = graph::OovPolicy::kHashed;
    std::uint64_t embedding_seed = 0;
};

nlohmann::json record_to_json(const InstanceRecord& record);
/// Throws kSchema naming the record id and field on malformed input.
InstanceRecord record_from_json(const nlohmann::json& j);

Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options = {});
/// Writes the header line and one record per line.
void save_dataset(const std::filesystem::path& path, const DatasetHeader& header,
                  const std::vector<InstanceRecord>& records);

std::vector<retrieval::FactTriple> load_knowledge_base(const std::filesystem::path& path);
void save_knowledge_base(const std::filesystem::path& path, const std::vector<retrieval::FactTriple>& facts);

struct RetrievalConfig {
    std::size_t top_k = 100;
    std::size_t top_m = 3;
    bool relation_filter = true;
    retrieval::ScoreMode mode = retrieval::ScoreMode::kMeanAllPairs;
};

struct BuildOptions {
    RetrievalConfig retrieval;
    std::size_t max_objects = graph::kDefaultMaxObjects;
    std::size_t max_question_tokens = 20;
};

struct BuildResult {
    std::vector<graph::Instance> instances;
    /// Instances whose answer did not survive retrieval and filtering.
    std::vector<ValidationIssue> issues;
};

/// Turns a record into a graph instance. Knowledge-base records retrieve the
/// top-k facts for the question plus object labels, then keep the facts whose
/// relation is among the classifier's top-m (falling back to the unfiltered set
/// when none match). A missing classifier disables the filter.
graph::Instance build_instance(const InstanceRecord& record, const Dataset& dataset, const BuildOptions& options,
                               const retrieval::RelationClassifier* classifier = nullptr);

BuildResult build_instances(const Dataset& dataset, const std::vector<InstanceRecord>& records,
                            const BuildOptions& options, const retrieval::RelationClassifier* classifier = nullptr);

/// Records split by fold: fold == test_fold goes to test.
struct Split {
    std::vector<InstanceRecord> train;
    std::vector<InstanceRecord> test;
};
Split split_by_fold(const std::vector<InstanceRecord>& records, int test_fold);

/// Question/relation pairs for the relation classifier.
std::vector<retrieval::RelationClassifier::Example> relation_examples(const std::vector<InstanceRecord>& records,
                                                                      const graph::EmbeddingTable& table,
                                                                      std::size_t max_tokens = 20);

nlohmann::json issues_to_json(const std::vector<ValidationIssue>& issues);

}  // namespace kgvqa::io
