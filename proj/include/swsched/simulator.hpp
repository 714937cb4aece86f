#pragma once

// Abstract core-group machine. Each PE owns a scratchpad of ldm_bytes whose
// cells are valid only after a DMA get or a compute write; reading an invalid
// cell faults. PEs run one after another with a barrier between operators.

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"

#include "swsched/ldm_planner.hpp"
#include "swsched/schedule.hpp"
#include "swsched/tensor_ir.hpp"

namespace swsched {

struct SimStats {
  int64_t dma_get_count = 0;
  int64_t dma_put_count = 0;
  int64_t dma_bytes = 0;
  int64_t dma_strided_ops = 0;  // executions moving more than one row
  int64_t scalar_mem_ops = 0;   // loads and stores of unbuffered accesses
  int64_t ldm_high_water = 0;   // bytes, maximum over PEs
  int64_t steps = 0;            // compute body executions

  int64_t dma_execs() const { return dma_get_count + dma_put_count; }
  SimStats& operator+=(const SimStats& o);
  friend bool operator==(const SimStats&, const SimStats&) = default;
};

nlohmann::json to_json(const SimStats& s);

struct SimOptions {
  std::vector<int> pe_order;  // empty: 0, 1, ..., num_pes - 1
};

/// Storage of one access: the whole tensor, flat.
template <class T>
using Binding = std::span<T>;

/// Runs one scheduled operator. `bindings[a]` is the storage of access a.
/// Throws SimulationError on overflow, invalid reads or write conflicts.
template <class T>
SimStats simulate_nest(const ScheduledNest& s, const MachineConfig& machine,
                       std::span<const Binding<T>> bindings, const SimOptions& options = {});

/// Convenience form over named tensors; missing tensors are zero-filled.
template <class T>
SimStats simulate_nest(const ScheduledNest& s, const MachineConfig& machine, TensorMap<T>& data,
                       const SimOptions& options = {});

}  // namespace swsched
