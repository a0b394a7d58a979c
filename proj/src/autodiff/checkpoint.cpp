#include "kgvqa/autodiff/checkpoint.hpp"

#include <fstream>

#include "kgvqa/error.hpp"

namespace kgvqa::ad {

using nlohmann::json;

json checkpoint_to_json(const ParamStore& store, const json& metadata) {
    json params = json::array();
    for (const auto& e : store) {
        params.push_back({{"name", e.name}, {"shape", e.tensor.shape}, {"values", e.tensor.values}});
    }
    return {{"format_version", kCheckpointFormatVersion},
            {"kind", "checkpoint"},
            {"metadata", metadata},
            {"params", std::move(params)}};
}

void load_checkpoint_values(const json& checkpoint, ParamStore& store) {
    if (!checkpoint.is_object() || checkpoint.value("kind", "") != "checkpoint") {
        throw Error(ErrorCode::kSchema, "checkpoint: not a checkpoint document");
    }
    const int version = checkpoint.value("format_version", -1);
    if (version != kCheckpointFormatVersion) {
        throw Error(ErrorCode::kSchema, "checkpoint: unsupported format_version " + std::to_string(version));
    }
    const auto& params = checkpoint.at("params");
    if (params.size() != store.size()) {
        throw Error(ErrorCode::kSchema, "checkpoint: holds " + std::to_string(params.size()) +
                                            " parameters, model expects " + std::to_string(store.size()));
    }
    for (const auto& p : params) {
        const auto name = p.at("name").get<std::string>();
        auto index = store.find(name);
        if (!index) throw Error(ErrorCode::kSchema, "checkpoint: unexpected parameter '" + name + "'");
        auto shape = p.at("shape").get<std::vector<std::size_t>>();
        Tensor& t = store[*index];
        if (shape != t.shape) {
            throw Error(ErrorCode::kSchema, "checkpoint: parameter '" + name + "' has shape " + shape_string(shape) +
                                                ", model expects " + shape_string(t.shape));
        }
        auto values = p.at("values").get<std::vector<double>>();
        if (values.size() != t.size()) {
            throw Error(ErrorCode::kSchema, "checkpoint: parameter '" + name + "' has wrong value count");
        }
        t.values = std::move(values);
        t.zero_grad();
    }
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store, const json& metadata) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::kIo, "checkpoint: cannot write " + path.string());
    out << checkpoint_to_json(store, metadata).dump() << '\n';
}

json read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "checkpoint: cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kSchema, std::string("checkpoint: ") + e.what());
    }
}

}  // namespace kgvqa::ad
