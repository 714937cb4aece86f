#pragma once

// Partitioning of the outermost output-indexing spatial loop across PEs.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "swsched/ldm_planner.hpp"
#include "swsched/tensor_ir.hpp"

namespace swsched {

struct Partition {
  std::string var;                  // partitioned loop (possibly fused)
  std::vector<std::string> fused;   // root loops combined into `var`
  int64_t extent = 0;
  int num_pes = 1;
  int64_t chunk = 0;                // ceil(extent / num_pes)
  std::vector<std::pair<int64_t, int64_t>> bounds;  // [begin, end) per PE

  int active_pes() const;
};

/// Ceil-sized chunks to leading PEs; trailing PEs may get empty ranges.
std::vector<std::pair<int64_t, int64_t>> partition_bounds(int64_t extent, int num_pes);

struct ParallelResult {
  LoopNest nest;
  std::optional<Partition> partition;
  std::optional<VarId> pe_var, local_var;
};

/// Fuses adjacent output-indexing spatial loops until there is one per PE,
/// splits the result into (pe, local) and binds pe. Without a spatial
/// output loop the nest is returned unchanged and runs on PE 0.
ParallelResult parallelize(const LoopNest& nest, const MachineConfig& machine);

/// Partitions the named loop as given, with no fusion and no legality check
/// beyond the loop being spatial; used by schedule overrides.
ParallelResult parallelize_on(const LoopNest& nest, VarId var, const MachineConfig& machine);

}  // namespace swsched
