#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include <json.hpp>

#include "kgvqa/graph/instance.hpp"
#include "kgvqa/model/params.hpp"

namespace kgvqa::io {

inline constexpr int kTraceFormatVersion = 1;

struct TraceOptions {
    /// Highest-beta incoming edges kept per node.
    std::size_t top_edges = 2;
    /// Highest-gamma source nodes kept per fact entity.
    std::size_t top_neighbors = 4;
    /// Also write full gate vectors next to the segment means.
    bool raw_gates = false;
    /// Also write the message vectors.
    bool messages = false;
    std::optional<std::size_t> steps;
};

/// Forward pass with dropout off, serialized per step: alpha per layer node,
/// beta per edge with the top-attended incoming edges of every node, the
/// fact x source gamma matrices with top-attended sources, and per entity the
/// mean gate over the visual, semantic and entity segments. Ends with the
/// entity ranking.
nlohmann::json trace_instance(const graph::Instance& instance, const model::ModelParams& params,
                              const TraceOptions& options = {});

/// {format_version, kind: "trace", options, instances: [...]}
nlohmann::json export_trace(std::span<const graph::Instance> instances, const model::ModelParams& params,
                            const TraceOptions& options = {});

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

struct TraceCheck {
    std::size_t instances = 0;
    std::size_t distributions = 0;
    std::size_t gate_values = 0;
    std::size_t violations = 0;
    std::string first_violation;
};

/// Re-reads a trace document: every alpha, beta and gamma group sums to one
/// within tol, weights are nonnegative and gate summaries lie in (0, 1).
TraceCheck check_trace(const nlohmann::json& doc, double tol = 1e-6);

}  // namespace kgvqa::io
