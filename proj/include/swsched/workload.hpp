#pragma once

// Workload description files. A workload is a layer graph plus machine
// overrides; per-layer schedule overrides are optional. Validation is strict:
// unknown keys, wrong types and non-positive extents are ParseErrors that name
// the offending JSON location.
//
// {
//   "name": "matmul256", "elem": "f32",
//   "machine": {"ldm_bytes": 65536, "num_pes": 64, "init_chunk": 64, "ldm_reserve": 0},
//   "inputs": [{"name": "A", "shape": [256, 256]}],          // outermost first
//   "layers": [{"name": "C", "kind": "matmul", "inputs": ["A", "B"],
//               "attrs": {...}, "schedule": {...}}],
//   "plan": ...                                              // ignored on input
// }

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "swsched/graph.hpp"
#include "swsched/ldm_planner.hpp"

namespace swsched {

struct Workload {
  LayerGraph graph;
  MachineConfig machine;
};

Workload workload_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Workload& w);

/// Parses JSON text; syntax errors report line and column.
Workload parse_workload(std::string_view text, std::string_view source = "<input>");
Workload load_workload(const std::filesystem::path& path);

/// Keys accepted at each level, which the published schema mirrors.
const std::vector<std::string>& workload_keys();
const std::vector<std::string>& machine_keys();
const std::vector<std::string>& input_keys();
const std::vector<std::string>& layer_keys();
/// Attribute keys valid for a layer kind.
const std::vector<std::string>& attr_keys(LayerKind kind);

/// Built-in workloads by name (without ".json").
const std::vector<std::string>& bundled_workload_names();
Workload bundled_workload(std::string_view name);

/// The workload with every layer's schedule replaced by the overrides that
/// rebuild the given program's main operators. Loading the result and
/// lowering it again yields the same plan.
nlohmann::json plan_workload_json(const ProgramPlan& program);

}  // namespace swsched
