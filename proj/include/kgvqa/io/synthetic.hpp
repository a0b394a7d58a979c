#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgvqa/io/dataset.hpp"

namespace kgvqa::io {

/// Parameters of the generated task. Each instance has `entities_per_graph`
/// candidate entities joined by facts of the question's relation, so the fact
/// layer alone does not single out the answer. The answer is marked by an
/// object whose feature encodes its word vector (visual cue) and/or by
/// captions about it (semantic cue); without a cue the same layout shows an
/// entity outside the candidate set. Optional scenery objects and captions
/// recur across instances, optional distractors name other non-candidates.
struct SyntheticSpec {
    std::size_t num_instances = 2500;
    std::size_t entities_per_graph = 8;
    std::size_t vocabulary = 16;
    std::vector<std::string> relations = {"UsedFor", "IsA", "AtLocation", "CapableOf", "PartOf", "HasProperty"};
    double visual_cue_rate = 1.0;
    double semantic_cue_rate = 1.0;
    /// Overlapping detections of the cued entity.
    std::size_t object_views = 2;
    std::size_t caption_attributes = 2;
    std::size_t scenery_objects = 0;
    std::size_t scenery_captions = 0;
    std::size_t distractor_objects = 0;
    std::size_t distractor_captions = 0;
    double visual_noise = 0.1;
    std::size_t visual_dim = 32;
    std::size_t word_dim = 16;
    std::size_t folds = 5;
    CandidateSource source = CandidateSource::kInline;
    std::uint64_t seed = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const SyntheticSpec& s);
void from_json(const nlohmann::json& j, SyntheticSpec& s);

/// Deterministic in the spec. Knowledge-base mode also fills
/// dataset.knowledge_base with one fact per (entity, relation).
Dataset generate_synthetic(const SyntheticSpec& spec);

/// Writes dataset.jsonl, embeddings.txt and, when present, kb.json into dir.
/// Returns the dataset file path.
std::filesystem::path write_dataset_files(const std::filesystem::path& dir, Dataset dataset);

/// Question template for a relation; "{}" marks the filler word.
std::string question_template(const std::string& relation);

}  // namespace kgvqa::io
