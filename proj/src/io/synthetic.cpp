#include "kgvqa/io/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "kgvqa/error.hpp"
#include "kgvqa/text.hpp"

namespace kgvqa::io {

namespace {

constexpr std::array<const char*, 96> kNouns = {
    "hydrant", "umbrella", "bicycle", "kite",    "oven",     "toaster",  "laptop",  "guitar",   "carrot",  "banana",
    "saddle",  "anchor",   "ladder",  "hammer",  "candle",   "kettle",   "pillow",  "bucket",   "shovel",  "lantern",
    "violin",  "helmet",   "compass", "blanket", "scissors", "wallet",   "rocket",  "tractor",  "canoe",   "harbor",
    "castle",  "bridge",   "meadow",  "glacier", "volcano",  "desert",   "orchard", "library",  "bakery",  "stadium",
    "giraffe", "penguin",  "dolphin", "falcon",  "beetle",   "turtle",   "camel",   "zebra",    "otter",   "badger",
    "cactus",  "tulip",    "maple",   "bamboo",  "mushroom", "pumpkin",  "lemon",   "cherry",   "walnut",  "pepper",
    "mirror",  "clock",    "piano",   "drum",    "trumpet",  "camera",   "printer", "keyboard", "monitor", "router",
    "sandal",  "scarf",    "jacket",  "glove",   "boot",     "necklace", "ribbon",  "button",   "zipper",  "pocket",
    "engine",  "wheel",    "sail",    "rudder",  "propeller", "battery", "magnet",  "lens",     "mast",    "chimney",
    "fountain", "statue",  "tunnel",  "tower",   "windmill", "lighthouse"};

constexpr std::array<const char*, 12> kAttributes = {"red",   "green",  "wooden", "metal", "striped", "round",
                                                     "small", "shiny",  "old",    "soft",  "bright",  "heavy"};

constexpr std::array<const char*, 4> kScenery = {"sky", "wall", "road", "grass"};

constexpr std::array<const char*, 6> kFillers = {"object", "thing", "item", "one", "piece", "stuff"};

std::vector<std::string> entity_names(std::size_t n) {
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::string name = kNouns[i % kNouns.size()];
        if (i >= kNouns.size()) name += std::to_string(i / kNouns.size());
        out.push_back(std::move(name));
    }
    return out;
}

std::vector<std::string> split_words(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ' ') {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

}  // namespace

void SyntheticSpec::validate() const {
    if (num_instances == 0 || entities_per_graph == 0 || visual_dim == 0 || word_dim == 0 || folds == 0) {
        throw Error(ErrorCode::kInvalidArgument, "synthetic spec: sizes must be positive");
    }
    if (relations.empty()) throw Error(ErrorCode::kInvalidArgument, "synthetic spec: empty relation vocabulary");
    if (object_views == 0 || caption_attributes == 0) {
        throw Error(ErrorCode::kInvalidArgument, "synthetic spec: object_views and caption_attributes must be positive");
    }
    const auto needed = entities_per_graph + distractor_objects + distractor_captions + 2;
    if (vocabulary < needed) {
        throw Error(ErrorCode::kInvalidArgument, "synthetic spec: vocabulary of " + std::to_string(vocabulary) +
                                                     " is smaller than the " + std::to_string(needed) +
                                                     " entities an instance needs");
    }
    for (double r : {visual_cue_rate, semantic_cue_rate}) {
        if (!(r >= 0.0 && r <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "synthetic spec: cue rates must lie in [0, 1]");
    }
    if (!(visual_noise >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "synthetic spec: negative visual noise");
}

void to_json(nlohmann::json& j, const SyntheticSpec& s) {
    j = {{"num_instances", s.num_instances},
         {"entities_per_graph", s.entities_per_graph},
         {"vocabulary", s.vocabulary},
         {"relations", s.relations},
         {"visual_cue_rate", s.visual_cue_rate},
         {"semantic_cue_rate", s.semantic_cue_rate},
         {"object_views", s.object_views},
         {"caption_attributes", s.caption_attributes},
         {"scenery_objects", s.scenery_objects},
         {"scenery_captions", s.scenery_captions},
         {"distractor_objects", s.distractor_objects},
         {"distractor_captions", s.distractor_captions},
         {"visual_noise", s.visual_noise},
         {"visual_dim", s.visual_dim},
         {"word_dim", s.word_dim},
         {"folds", s.folds},
         {"candidate_source", s.source == CandidateSource::kInline ? "inline" : "knowledge_base"},
         {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SyntheticSpec& s) {
    SyntheticSpec d;
    s.num_instances = j.value("num_instances", d.num_instances);
    s.entities_per_graph = j.value("entities_per_graph", d.entities_per_graph);
    s.vocabulary = j.value("vocabulary", d.vocabulary);
    s.relations = j.value("relations", d.relations);
    s.visual_cue_rate = j.value("visual_cue_rate", d.visual_cue_rate);
    s.semantic_cue_rate = j.value("semantic_cue_rate", d.semantic_cue_rate);
    s.object_views = j.value("object_views", d.object_views);
    s.caption_attributes = j.value("caption_attributes", d.caption_attributes);
    s.scenery_objects = j.value("scenery_objects", d.scenery_objects);
    s.scenery_captions = j.value("scenery_captions", d.scenery_captions);
    s.distractor_objects = j.value("distractor_objects", d.distractor_objects);
    s.distractor_captions = j.value("distractor_captions", d.distractor_captions);
    s.visual_noise = j.value("visual_noise", d.visual_noise);
    s.visual_dim = j.value("visual_dim", d.visual_dim);
    s.word_dim = j.value("word_dim", d.word_dim);
    s.folds = j.value("folds", d.folds);
    const auto source = j.value("candidate_source", std::string("inline"));
    if (source != "inline" && source != "knowledge_base") {
        throw Error(ErrorCode::kSchema, "synthetic spec: candidate_source must be \"inline\" or \"knowledge_base\"");
    }
    s.source = source == "inline" ? CandidateSource::kInline : CandidateSource::kKnowledgeBase;
    s.seed = j.value("seed", d.seed);
}

std::string question_template(const std::string& relation) {
    if (relation == "UsedFor") return "what is the {} used for";
    if (relation == "IsA") return "what kind of thing is the {}";
    if (relation == "AtLocation") return "where can you find the {}";
    if (relation == "CapableOf") return "what can the {} do";
    if (relation == "PartOf") return "what is the {} a part of";
    if (relation == "HasProperty") return "what property does the {} have";
    if (relation == "HasA") return "what does the {} have";
    if (relation == "Desires") return "what does the {} want";
    auto words = tokenize(relation);
    return "which " + join(words) + " relation holds for the {}";
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Dataset ds;
    ds.header.relations = spec.relations;
    ds.header.visual_dim = spec.visual_dim;
    ds.header.word_dim = spec.word_dim;
    ds.header.embeddings = "embeddings.txt";
    if (spec.source == CandidateSource::kKnowledgeBase) ds.header.knowledge_base = "kb.json";

    const auto entities = entity_names(spec.vocabulary);
    // Every word the generator can emit gets an explicit vector.
    graph::EmbeddingTable table(spec.word_dim, graph::OovPolicy::kHashed, spec.seed);
    auto add_word = [&](const std::string& w) {
        if (!table.contains(w)) table.insert(w, graph::hashed_embedding(w, spec.word_dim, spec.seed));
    };
    for (const auto& e : entities) add_word(e);
    for (const auto* a : kAttributes) add_word(a);
    for (const auto* f : kFillers) add_word(f);
    for (const auto* w : kScenery) add_word(w);
    add_word("is");
    for (const auto& r : spec.relations) {
        for (const auto& t : tokenize(r)) add_word(t);
        for (const auto& t : split_words(question_template(r))) {
            if (t != "{}") add_word(t);
        }
    }

    // Fixed linear map from word space to appearance space.
    std::vector<double> appearance(spec.visual_dim * spec.word_dim);
    for (auto& a : appearance) a = normal(rng);
    auto visual_feature = [&](const std::string& entity) {
        const auto w = table.lookup(entity);
        std::vector<double> f(spec.visual_dim, 0.0);
        for (std::size_t r = 0; r < spec.visual_dim; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < spec.word_dim; ++c) s += appearance[r * spec.word_dim + c] * w[c];
            f[r] = s + spec.visual_noise * normal(rng);
        }
        return f;
    };
    auto random_box = [&]() {
        graph::BoundingBox b;
        b.x = std::round(unit(rng) * 400.0);
        b.y = std::round(unit(rng) * 300.0);
        b.w = 20.0 + std::round(unit(rng) * 180.0);
        b.h = 20.0 + std::round(unit(rng) * 180.0);
        return b;
    };

    // Knowledge base: one fact per (entity, relation), partner chosen by a
    // per-relation permutation.
    if (spec.source == CandidateSource::kKnowledgeBase) {
        for (const auto& r : spec.relations) {
            std::vector<std::size_t> perm(entities.size());
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            for (std::size_t i = 0; i < entities.size(); ++i) {
                ds.knowledge_base.push_back({entities[i], r, entities[perm[i]]});
            }
        }
    }

    std::vector<std::size_t> pool(entities.size());
    std::iota(pool.begin(), pool.end(), 0);
    const std::size_t n = spec.entities_per_graph;
    for (std::size_t idx = 0; idx < spec.num_instances; ++idx) {
        InstanceRecord rec;
        rec.id = "syn-" + std::to_string(idx);
        rec.fold = static_cast<int>(idx % spec.folds);
        rec.source = spec.source;
        rec.relation = spec.relations[rng() % spec.relations.size()];

        std::shuffle(pool.begin(), pool.end(), rng);
        std::vector<std::string> candidates;
        for (std::size_t i = 0; i < n; ++i) candidates.push_back(entities[pool[i]]);
        std::vector<std::string> others;
        for (std::size_t i = n; i < pool.size(); ++i) others.push_back(entities[pool[i]]);
        const auto& answer = candidates[rng() % n];
        rec.answer = answer;

        const auto filler = std::string(kFillers[rng() % kFillers.size()]);
        for (auto& w : split_words(question_template(rec.relation))) rec.question.push_back(w == "{}" ? filler : w);

        const bool visual_cue = unit(rng) < spec.visual_cue_rate;
        const bool semantic_cue = unit(rng) < spec.semantic_cue_rate;

        // The cued entity is seen as several overlapping detections and
        // described by captions sharing it as subject. Without a cue the same
        // layout shows a decoy entity that is not a candidate.
        const auto& seen = visual_cue ? answer : others[spec.distractor_objects];
        const auto main_box = random_box();
        std::vector<std::pair<std::string, graph::BoundingBox>> shown;
        for (std::size_t v = 0; v < spec.object_views; ++v) {
            auto b = main_box;
            if (v > 0) {
                b.w = std::max(1.0, std::round(main_box.w * (0.4 + 0.4 * unit(rng))));
                b.h = std::max(1.0, std::round(main_box.h * (0.4 + 0.4 * unit(rng))));
                b.x += std::round((main_box.w - b.w) * unit(rng));
                b.y += std::round((main_box.h - b.h) * unit(rng));
            }
            shown.emplace_back(seen, b);
        }
        for (std::size_t i = 0; i < spec.distractor_objects; ++i) shown.emplace_back(others[i], random_box());
        for (std::size_t i = 0; i < spec.scenery_objects; ++i) {
            shown.emplace_back(kScenery[rng() % kScenery.size()], random_box());
        }
        std::shuffle(shown.begin(), shown.end(), rng);
        for (const auto& [e, box] : shown) rec.objects.push_back({visual_feature(e), box, e});

        const auto& told = semantic_cue ? answer : others[others.size() - 1 - spec.distractor_captions];
        std::vector<std::string> described(spec.caption_attributes, told);
        for (std::size_t i = 0; i < spec.distractor_captions; ++i) described.push_back(others[others.size() - 1 - i]);
        for (std::size_t i = 0; i < spec.scenery_captions; ++i) described.push_back(kScenery[rng() % kScenery.size()]);
        std::shuffle(described.begin(), described.end(), rng);
        for (const auto& e : described) {
            rec.captions.push_back({{e}, {"is"}, {kAttributes[rng() % kAttributes.size()]}});
        }

        if (spec.source == CandidateSource::kInline) {
            // Candidates in a ring, all joined by the question's relation.
            for (std::size_t i = 0; i < n; ++i) rec.facts.push_back({candidates[i], rec.relation, candidates[(i + 1) % n]});
        }
        ds.records.push_back(std::move(rec));
    }
    ds.embeddings = std::move(table);
    return ds;
}

std::filesystem::path write_dataset_files(const std::filesystem::path& dir, Dataset dataset) {
    std::filesystem::create_directories(dir);
    if (dataset.header.embeddings.empty()) dataset.header.embeddings = "embeddings.txt";
    dataset.embeddings.save_text(dir / dataset.header.embeddings);
    if (!dataset.knowledge_base.empty()) {
        if (dataset.header.knowledge_base.empty()) dataset.header.knowledge_base = "kb.json";
        save_knowledge_base(dir / dataset.header.knowledge_base, dataset.knowledge_base);
    }
    const auto path = dir / "dataset.jsonl";
    save_dataset(path, dataset.header, dataset.records);
    return path;
}

}  // namespace kgvqa::io
