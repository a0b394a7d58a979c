#include "kgvqa/io/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "kgvqa/error.hpp"
#include "kgvqa/text.hpp"

namespace kgvqa::io {

using nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& id, const std::string& field, const std::string& what) {
    throw Error(ErrorCode::kSchema, "record '" + id + "': field '" + field + "': " + what);
}

// Looks up key in j; errors report the field as prefix + key.
const json& require(const json& j, const std::string& id, const std::string& key, const std::string& prefix = {}) {
    if (!j.is_object()) schema_error(id, prefix.empty() ? key : prefix, "not a JSON object");
    auto it = j.find(key);
    if (it == j.end()) schema_error(id, prefix + key, "missing");
    return *it;
}

template <class T>
T get_as(const json& j, const std::string& id, const std::string& field) {
    try {
        return j.get<T>();
    } catch (const json::exception& e) {
        schema_error(id, field, std::string("wrong type (") + j.type_name() + ")");
    }
}

std::vector<std::string> token_list(const json& j, const std::string& id, const std::string& field) {
    auto v = get_as<std::vector<std::string>>(j, id, field);
    if (v.empty()) schema_error(id, field, "empty token list");
    return v;
}

json fact_to_json(const retrieval::FactTriple& f) { return {{"e1", f.e1}, {"relation", f.relation}, {"e2", f.e2}}; }

retrieval::FactTriple fact_from_json(const json& j, const std::string& id, const std::string& field) {
    const auto p = field + ".";
    retrieval::FactTriple f{get_as<std::string>(require(j, id, "e1", p), id, p + "e1"),
                            get_as<std::string>(require(j, id, "relation", p), id, p + "relation"),
                            get_as<std::string>(require(j, id, "e2", p), id, p + "e2")};
    if (f.e1.empty() || f.relation.empty() || f.e2.empty()) schema_error(id, field, "empty fact field");
    return f;
}

std::string source_name(CandidateSource s) { return s == CandidateSource::kInline ? "inline" : "knowledge_base"; }

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        lines.push_back(std::move(line));
    }
    return lines;
}

json parse_line(const std::string& line, const std::filesystem::path& path, std::size_t lineno) {
    try {
        return json::parse(line);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::kSchema, path.string() + ":" + std::to_string(lineno) + ": invalid JSON");
    }
}

void check_version(const json& j, const std::string& where, int expected) {
    if (!j.is_object() || !j.contains("format_version")) {
        throw Error(ErrorCode::kSchema, where + ": missing format_version");
    }
    if (!j.at("format_version").is_number_integer() || j.at("format_version").get<int>() != expected) {
        throw Error(ErrorCode::kSchema, where + ": unsupported format_version " + j.at("format_version").dump());
    }
}

std::vector<std::string> context_tokens(const InstanceRecord& r) {
    std::vector<std::string> out;
    for (const auto& o : r.objects) {
        for (auto& t : tokenize(o.label)) out.push_back(std::move(t));
    }
    return out;
}

std::vector<std::string> question_tokens(const InstanceRecord& r) {
    std::vector<std::string> out;
    for (const auto& q : r.question) {
        for (auto& t : tokenize(q)) out.push_back(std::move(t));
    }
    return out;
}

}  // namespace

json record_to_json(const InstanceRecord& r) {
    json objects = json::array();
    for (const auto& o : r.objects) {
        objects.push_back({{"feature", o.feature},
                           {"bbox", {o.bbox.x, o.bbox.y, o.bbox.w, o.bbox.h}},
                           {"label", o.label}});
    }
    json captions = json::array();
    for (const auto& c : r.captions) {
        captions.push_back({{"subject", c.subject}, {"relation", c.relation}, {"object", c.object}});
    }
    json facts = json::array();
    for (const auto& f : r.facts) facts.push_back(fact_to_json(f));
    return {{"id", r.id},
            {"fold", r.fold},
            {"question", r.question},
            {"relation", r.relation},
            {"objects", std::move(objects)},
            {"captions", std::move(captions)},
            {"candidate_source", source_name(r.source)},
            {"facts", std::move(facts)},
            {"answer", r.answer}};
}

InstanceRecord record_from_json(const json& j) {
    InstanceRecord r;
    if (!j.is_object()) schema_error("?", "record", "not a JSON object");
    r.id = get_as<std::string>(require(j, "?", "id"), "?", "id");
    const auto& id = r.id;
    if (id.empty()) schema_error(id, "id", "empty");
    r.fold = get_as<int>(require(j, id, "fold"), id, "fold");
    r.question = token_list(require(j, id, "question"), id, "question");
    r.relation = get_as<std::string>(require(j, id, "relation"), id, "relation");
    r.answer = get_as<std::string>(require(j, id, "answer"), id, "answer");
    if (r.answer.empty()) schema_error(id, "answer", "empty");

    const auto& objects = require(j, id, "objects");
    if (!objects.is_array()) schema_error(id, "objects", "not an array");
    for (std::size_t i = 0; i < objects.size(); ++i) {
        const auto field = "objects[" + std::to_string(i) + "]";
        const auto& o = objects[i];
        graph::VisualNode node;
        node.feature = get_as<std::vector<double>>(require(o, id, "feature", field + "."), id, field + ".feature");
        auto box = get_as<std::vector<double>>(require(o, id, "bbox", field + "."), id, field + ".bbox");
        if (box.size() != 4) schema_error(id, field + ".bbox", "expected [x, y, w, h]");
        node.bbox = {box[0], box[1], box[2], box[3]};
        if (!(node.bbox.w > 0.0) || !(node.bbox.h > 0.0)) schema_error(id, field + ".bbox", "width and height must be positive");
        node.label = get_as<std::string>(require(o, id, "label", field + "."), id, field + ".label");
        r.objects.push_back(std::move(node));
    }

    const auto& captions = require(j, id, "captions");
    if (!captions.is_array()) schema_error(id, "captions", "not an array");
    for (std::size_t i = 0; i < captions.size(); ++i) {
        const auto field = "captions[" + std::to_string(i) + "]";
        const auto& c = captions[i];
        r.captions.push_back({token_list(require(c, id, "subject", field + "."), id, field + ".subject"),
                              token_list(require(c, id, "relation", field + "."), id, field + ".relation"),
                              token_list(require(c, id, "object", field + "."), id, field + ".object")});
    }

    const auto source = get_as<std::string>(require(j, id, "candidate_source"), id, "candidate_source");
    if (source == "inline") {
        r.source = CandidateSource::kInline;
    } else if (source == "knowledge_base") {
        r.source = CandidateSource::kKnowledgeBase;
    } else {
        schema_error(id, "candidate_source", "expected \"inline\" or \"knowledge_base\"");
    }
    if (j.contains("facts")) {
        const auto& facts = j.at("facts");
        if (!facts.is_array()) schema_error(id, "facts", "not an array");
        for (std::size_t i = 0; i < facts.size(); ++i) {
            r.facts.push_back(fact_from_json(facts[i], id, "facts[" + std::to_string(i) + "]"));
        }
    }
    if (r.source == CandidateSource::kInline && r.facts.empty()) schema_error(id, "facts", "inline record without facts");
    return r;
}

std::vector<retrieval::FactTriple> load_knowledge_base(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open knowledge base '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error&) {
        throw Error(ErrorCode::kSchema, path.string() + ": invalid JSON");
    }
    check_version(j, path.string(), kKnowledgeBaseFormatVersion);
    if (!j.contains("facts") || !j.at("facts").is_array()) throw Error(ErrorCode::kSchema, path.string() + ": missing facts array");
    std::vector<retrieval::FactTriple> facts;
    const auto& arr = j.at("facts");
    for (std::size_t i = 0; i < arr.size(); ++i) {
        facts.push_back(fact_from_json(arr[i], "kb", "facts[" + std::to_string(i) + "]"));
    }
    return facts;
}

void save_knowledge_base(const std::filesystem::path& path, const std::vector<retrieval::FactTriple>& facts) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
    out << "{\"format_version\":" << kKnowledgeBaseFormatVersion << ",\"kind\":\"knowledge_base\",\"facts\":[\n";
    for (std::size_t i = 0; i < facts.size(); ++i) {
        out << fact_to_json(facts[i]).dump() << (i + 1 < facts.size() ? ",\n" : "\n");
    }
    out << "]}\n";
}

Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options) {
    const auto lines = read_lines(path);
    if (lines.empty()) throw Error(ErrorCode::kSchema, path.string() + ": empty dataset file");
    const auto header_json = parse_line(lines[0], path, 1);
    check_version(header_json, path.string() + " header", kDatasetFormatVersion);
    if (header_json.value("kind", "") != "dataset") throw Error(ErrorCode::kSchema, path.string() + ": first line is not a dataset header");

    Dataset ds;
    try {
        ds.header.relations = header_json.at("relations").get<std::vector<std::string>>();
        ds.header.visual_dim = header_json.at("visual_dim").get<std::size_t>();
        ds.header.word_dim = header_json.at("word_dim").get<std::size_t>();
        ds.header.knowledge_base = header_json.value("knowledge_base", "");
        ds.header.embeddings = header_json.value("embeddings", "");
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kSchema, path.string() + " header: " + e.what());
    }
    if (ds.header.word_dim == 0 || ds.header.visual_dim == 0) throw Error(ErrorCode::kSchema, path.string() + " header: zero dimension");

    const auto dir = path.parent_path();
    ds.embeddings = ds.header.embeddings.empty()
                        ? graph::EmbeddingTable(ds.header.word_dim, options.oov, options.embedding_seed)
                        : graph::EmbeddingTable::load_text(dir / ds.header.embeddings, options.oov, options.embedding_seed);
    if (ds.embeddings.dim() != ds.header.word_dim) {
        throw Error(ErrorCode::kSchema, "embedding dimension " + std::to_string(ds.embeddings.dim()) +
                                            " does not match header word_dim " + std::to_string(ds.header.word_dim));
    }
    if (!ds.header.knowledge_base.empty()) ds.knowledge_base = load_knowledge_base(dir / ds.header.knowledge_base);

    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto j = parse_line(lines[i], path, i + 1);
        if (j.contains("format_version")) check_version(j, path.string() + ":" + std::to_string(i + 1), kDatasetFormatVersion);
        auto r = record_from_json(j);
        for (std::size_t o = 0; o < r.objects.size(); ++o) {
            if (r.objects[o].feature.size() != ds.header.visual_dim) {
                schema_error(r.id, "objects[" + std::to_string(o) + "].feature",
                             "length " + std::to_string(r.objects[o].feature.size()) + " != visual_dim " +
                                 std::to_string(ds.header.visual_dim));
            }
        }
        if (!r.relation.empty() && !ds.header.relations.empty() &&
            std::find(ds.header.relations.begin(), ds.header.relations.end(), r.relation) == ds.header.relations.end()) {
            schema_error(r.id, "relation", "'" + r.relation + "' is not in the header relation vocabulary");
        }
        if (r.source == CandidateSource::kKnowledgeBase && ds.header.knowledge_base.empty()) {
            schema_error(r.id, "candidate_source", "dataset has no knowledge base");
        }
        if (r.source == CandidateSource::kInline) {
            const bool found = std::any_of(r.facts.begin(), r.facts.end(),
                                           [&](const auto& f) { return f.e1 == r.answer || f.e2 == r.answer; });
            if (!found) ds.issues.push_back({r.id, "answer '" + r.answer + "' is not a candidate entity"});
        }
        ds.records.push_back(std::move(r));
    }
    return ds;
}

void save_dataset(const std::filesystem::path& path, const DatasetHeader& header,
                  const std::vector<InstanceRecord>& records) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
    json h = {{"format_version", kDatasetFormatVersion},
              {"kind", "dataset"},
              {"relations", header.relations},
              {"visual_dim", header.visual_dim},
              {"word_dim", header.word_dim},
              {"knowledge_base", header.knowledge_base},
              {"embeddings", header.embeddings}};
    out << h.dump() << '\n';
    for (const auto& r : records) out << record_to_json(r).dump() << '\n';
    if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

graph::Instance build_instance(const InstanceRecord& record, const Dataset& dataset, const BuildOptions& options,
                               const retrieval::RelationClassifier* classifier) {
    const auto& table = dataset.embeddings;
    graph::Instance inst;
    inst.id = record.id;
    inst.fold = record.fold;
    inst.relation = record.relation;

    graph::VisualGraphOptions vopts;
    vopts.max_objects = options.max_objects;
    vopts.allow_empty = true;
    inst.graph.visual = graph::build_visual_graph(record.objects, vopts);
    if (inst.graph.visual.empty()) inst.graph.visual.node_dim = dataset.header.visual_dim;
    inst.graph.semantic = graph::build_semantic_graph(record.captions, table);
    inst.graph.question = graph::make_question(record.question, table, options.max_question_tokens);

    if (record.source == CandidateSource::kInline) {
        inst.graph.fact = graph::build_fact_graph(record.facts, table);
    } else {
        const auto q = question_tokens(record);
        const auto c = context_tokens(record);
        retrieval::ContextScorer scorer(q, c, table, options.retrieval.mode);
        auto candidates = retrieval::retrieve_top_k(dataset.knowledge_base, std::cref(scorer), options.retrieval.top_k);
        if (options.retrieval.relation_filter && classifier != nullptr) {
            candidates = retrieval::filter_by_relation_or_fallback(candidates, classifier->predict(inst.graph.question),
                                                                   options.retrieval.top_m);
        }
        inst.graph.fact = graph::build_fact_graph(candidates, table);
    }
    const auto& names = inst.graph.fact.node_names;
    auto it = std::find(names.begin(), names.end(), record.answer);
    if (it != names.end()) inst.answer = static_cast<std::size_t>(it - names.begin());
    return inst;
}

BuildResult build_instances(const Dataset& dataset, const std::vector<InstanceRecord>& records,
                            const BuildOptions& options, const retrieval::RelationClassifier* classifier) {
    BuildResult out;
    out.instances.reserve(records.size());
    for (const auto& r : records) {
        out.instances.push_back(build_instance(r, dataset, options, classifier));
        if (!out.instances.back().answer) {
            out.issues.push_back({r.id, "answer '" + r.answer + "' is not among the candidate entities"});
        }
    }
    return out;
}

Split split_by_fold(const std::vector<InstanceRecord>& records, int test_fold) {
    Split s;
    for (const auto& r : records) (r.fold == test_fold ? s.test : s.train).push_back(r);
    return s;
}

std::vector<retrieval::RelationClassifier::Example> relation_examples(const std::vector<InstanceRecord>& records,
                                                                      const graph::EmbeddingTable& table,
                                                                      std::size_t max_tokens) {
    std::vector<retrieval::RelationClassifier::Example> out;
    for (const auto& r : records) {
        if (r.relation.empty()) continue;
        out.push_back({graph::make_question(r.question, table, max_tokens), r.relation});
    }
    return out;
}

json issues_to_json(const std::vector<ValidationIssue>& issues) {
    json arr = json::array();
    for (const auto& i : issues) arr.push_back({{"id", i.id}, {"message", i.message}});
    return arr;
}

}  // namespace kgvqa::io
