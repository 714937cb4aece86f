#include "swsched/parallelizer.hpp"

#include <algorithm>
#include <array>

#include <spdlog/spdlog.h>

#include "swsched/error.hpp"

namespace swsched {

int Partition::active_pes() const {
  int n = 0;
  for (const auto& [b, e] : bounds) n += e > b ? 1 : 0;
  return n;
}

std::vector<std::pair<int64_t, int64_t>> partition_bounds(int64_t extent, int num_pes) {
  const int64_t chunk = (extent + num_pes - 1) / num_pes;
  std::vector<std::pair<int64_t, int64_t>> out;
  for (int pe = 0; pe < num_pes; ++pe) {
    const int64_t b = std::min(extent, pe * chunk);
    out.emplace_back(b, std::min(extent, b + chunk));
  }
  return out;
}

ParallelResult parallelize_on(const LoopNest& nest, VarId var, const MachineConfig& machine) {
  const IterVar& v = nest.var(var);
  if (v.kind != VarKind::spatial)
    throw ScheduleError("reduction loops cannot be partitioned across PEs");
  Partition part;
  part.var = v.name;
  part.extent = v.extent;
  part.num_pes = machine.num_pes;
  part.chunk = (v.extent + machine.num_pes - 1) / machine.num_pes;
  part.bounds = partition_bounds(v.extent, machine.num_pes);
  if (v.origin == VarOrigin::fused) {
    for (VarId p : v.parents) part.fused.push_back(nest.var(p).name);
  } else {
    part.fused.push_back(v.name);
  }
  auto s = split(nest, var, part.chunk, v.name + ".pe", v.name + ".l");
  ParallelResult r{bind_parallel(s.nest, s.outer), std::move(part), s.outer, s.inner};
  return r;
}

ParallelResult parallelize(const LoopNest& nest, const MachineConfig& machine) {
  const auto& out = nest.accesses()[LoopNest::output_access];
  auto indexes_output = [&](const LoopNest& n, VarId v) {
    const std::array<VarId, 1> one{v};
    return n.var(v).kind == VarKind::spatial && !dims_indexed_by(n, out, one).empty();
  };
  LoopNest cur = nest;
  std::optional<VarId> pick;
  for (VarId v : cur.order())
    if (indexes_output(cur, v)) {
      pick = v;
      break;
    }
  if (!pick) {
    spdlog::warn("'{}': no spatial loop indexes the output; running on one PE", nest.def().name);
    return ParallelResult{nest, std::nullopt, std::nullopt, std::nullopt};
  }

  while (cur.var(*pick).extent < machine.num_pes) {
    const auto& order = cur.order();
    const auto at = std::find(order.begin(), order.end(), *pick) - order.begin();
    std::optional<VarId> next;
    for (auto i = at + 1; i < static_cast<long>(order.size()); ++i)
      if (indexes_output(cur, order[i])) {
        next = order[i];
        break;
      }
    if (!next) break;
    // The nest is fully permutable, so pull `next` up against `pick`.
    std::vector<VarId> reordered;
    for (VarId v : order)
      if (v != *next) {
        reordered.push_back(v);
        if (v == *pick) reordered.push_back(*next);
      }
    cur = reorder(cur, reordered);
    auto f = fuse(cur, *pick, *next);
    cur = std::move(f.nest);
    pick = f.fused;
  }
  return parallelize_on(cur, *pick, machine);
}

}  // namespace swsched
