#pragma once

// Whole-network execution: the scheduled program on the simulated machine
// over one arena, and an independent direct evaluation of the layer graph.

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "swsched/graph.hpp"
#include "swsched/simulator.hpp"

namespace swsched {

template <class T>
struct ProgramResult {
  TensorMap<T> activations;  // every layer output
  std::vector<std::pair<std::string, SimStats>> layer_stats;  // topological order
  SimStats total;
};

/// Runs every sub-operator in order against one arena laid out by the
/// program's memory plan. Inputs and parameters absent from `data` are zero.
template <class T>
ProgramResult<T> simulate_program(const ProgramPlan& program, const TensorMap<T>& data,
                                  const SimOptions& options = {});

/// Direct loops per layer kind, written against the layer definitions and not
/// the tensor IR. Returns every layer output.
template <class T>
TensorMap<T> run_reference(const LayerGraph& graph, const TensorMap<T>& data);

/// max |got - want| / max(|want|, 1e-3 * max |want|); infinity on a size
/// mismatch. The floor keeps outputs near zero from dominating.
template <class T>
double max_relative_error(std::span<const T> got, std::span<const T> want);

}  // namespace swsched
