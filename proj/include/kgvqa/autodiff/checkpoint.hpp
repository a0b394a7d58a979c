#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "kgvqa/autodiff/param_store.hpp"

namespace kgvqa::ad {

inline constexpr int kCheckpointFormatVersion = 1;

/// {format_version, kind: "checkpoint", metadata, params: [{name, shape, values}]}
nlohmann::json checkpoint_to_json(const ParamStore& store, const nlohmann::json& metadata = nlohmann::json::object());

/// Copies values from a checkpoint into a store built from the same
/// configuration. Names and shapes must match exactly.
void load_checkpoint_values(const nlohmann::json& checkpoint, ParamStore& store);

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store,
                     const nlohmann::json& metadata = nlohmann::json::object());
nlohmann::json read_checkpoint(const std::filesystem::path& path);

}  // namespace kgvqa::ad
