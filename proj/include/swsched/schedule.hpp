#pragma once

// The per-operator pipeline: partition, size tiles, split, order the outer
// loops and place transfers.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "swsched/dma_inserter.hpp"
#include "swsched/ldm_planner.hpp"
#include "swsched/loop_orderer.hpp"
#include "swsched/parallelizer.hpp"
#include "swsched/tensor_ir.hpp"

namespace swsched {

/// Manual directives; each one replaces the corresponding automatic step.
struct ScheduleOverrides {
  /// Tile extent per loop name (post-partition names, e.g. "x.l"); loops not
  /// named get 1. Capacity is not checked.
  std::map<std::string, int64_t, std::less<>> buffer;
  /// Outer loop order by name; must be a permutation of the outer loops.
  std::vector<std::string> order;
  /// Loop to partition across PEs, or "none" for a single PE.
  std::optional<std::string> parallel;
  /// Tensors read or written with scalar accesses instead of tiles.
  std::set<std::string, std::less<>> unbuffered;

  bool empty() const { return buffer.empty() && order.empty() && !parallel && unbuffered.empty(); }
};

struct ScheduledNest {
  explicit ScheduledNest(LoopNest n) : nest(std::move(n)) {}

  LoopNest nest;  // split, ordered, PE loop bound
  std::optional<Partition> partition;
  std::vector<PlanVar> plan_vars;
  BufferPlan plan;
  int num_outer = 0;        // nest.order()[0, num_outer) are the outer loops
  std::vector<int> buffered;  // access indices moved by DMA
  OrderProblem order_problem;
  OrderReport order_report;
  std::vector<DmaDescriptor> dma;
  int num_pes = 1;
  int64_t predicted_dma_execs = 0;  // all PEs
  int64_t tile_bytes = 0;           // scratchpad allocation per PE

  std::span<const VarId> outer() const;
  std::span<const VarId> inner() const;
  bool is_buffered(int access) const;
};

ScheduledNest schedule_nest(const ComputeDef& def, const MachineConfig& machine,
                            const ScheduleOverrides& overrides = {});

/// Buffer extents, outer order and partition loop as overrides that rebuild
/// the same schedule.
ScheduleOverrides overrides_of(const ScheduledNest& s);

nlohmann::json to_json(const ScheduledNest& s);
ScheduleOverrides overrides_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScheduleOverrides& o);

}  // namespace swsched
