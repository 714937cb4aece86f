#pragma once

// Greedy scratchpad sizing: initialize tile extents, shrink on overflow with
// backtracking, then double extents until the next doubling would overflow.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "swsched/access_analysis.hpp"

namespace swsched {

struct MachineConfig {
  int64_t ldm_bytes = 65536;
  int num_pes = 64;
  int64_t init_chunk = 64;  // elements
  int64_t ldm_reserve = 0;  // bytes withheld from tiles (stack, parameters)

  int64_t capacity() const { return ldm_bytes - ldm_reserve; }
  /// Throws Error unless every field is positive and the reserve fits.
  void validate() const;
};

/// A loop variable offered to the planner. Pinned variables stay in the
/// sizing universe (they block frontier advance) but keep Buffer = 1.
struct PlanVar {
  VarId id;
  std::string name;
  int64_t extent = 1;
  bool pinned = false;
};

struct PlanCheckpoint {
  std::string var;
  int64_t buffer = 1;
  int64_t usage_bytes = 0;
  std::string decision;  // start, init, saturate, shrink, bottom, absorb, expand, reject, done
};

struct BufferPlan {
  BufferMap buffer;  // one entry per planned variable
  Frontiers frontiers;
  int64_t usage_bytes = 0;
  int64_t capacity_bytes = 0;
  std::vector<PlanCheckpoint> trace;

  int64_t at(VarId var) const;
};

/// Throws InfeasibleError when the tiles do not fit even at Buffer = 1.
BufferPlan plan_ldm(std::span<const PlanVar> vars, std::span<const TensorView> tensors,
                    const MachineConfig& machine);

nlohmann::json trace_to_json(const BufferPlan& plan);

}  // namespace swsched
