#pragma once

// Network-level planning: layer order, arena layout and per-layer lowering
// into scheduled operators.
//
// Every tensor lives in one arena. Graph inputs, parameters and activations
// are persistent and never reused; layer temporaries share one workspace
// sized to the largest per-layer need.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "swsched/ldm_planner.hpp"
#include "swsched/schedule.hpp"
#include "swsched/tensor_ir.hpp"

namespace swsched {

enum class LayerKind { conv2d, dense, maxpool, flatten, relu, add, matmul, vector_mul };

std::string_view to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view text);

struct LayerAttrs {
  int64_t filters = 0;  // conv2d output channels
  int64_t units = 0;    // dense outputs
  int64_t kernel = 1;
  int64_t stride = 1;
  int64_t pad = 0;      // conv2d only; lowered through a padded workspace copy
  bool bias = false;
  bool relu = false;
};

struct Layer {
  std::string name;  // also the name of its output tensor
  LayerKind kind = LayerKind::relu;
  std::vector<std::string> inputs;  // graph inputs or layer names
  LayerAttrs attrs;
  ScheduleOverrides schedule;  // applied to the layer's main operator
};

struct LayerGraph {
  std::string name;
  ElemKind elem = ElemKind::f32;
  std::vector<TensorDecl> inputs;
  std::vector<Layer> layers;

  const Layer* find(std::string_view layer) const;
};

/// Layer indices in dependency order; among independent layers the one
/// declared first goes first. Throws IrError on cycles or unknown inputs.
std::vector<int> topo_schedule(const LayerGraph& graph);

/// Tensors a layer reads and writes besides its inputs.
struct LayerTensors {
  TensorDecl output;
  std::vector<TensorDecl> params;  // weights, then bias
  std::vector<TensorDecl> temps;   // workspace
};

/// Shape propagation in topological order; throws IrError on inconsistent
/// shapes and duplicate tensor names.
std::map<std::string, LayerTensors, std::less<>> infer_shapes(const LayerGraph& graph);

enum class TensorRole { input, param, activation, temp };
std::string_view to_string(TensorRole role);

struct Allocation {
  TensorDecl tensor;
  TensorRole role = TensorRole::input;
  int64_t offset = 0;  // bytes into the arena
  int64_t bytes = 0;
};

struct MemoryPlan {
  std::vector<Allocation> persistent;  // inputs, then per layer params and output
  std::vector<Allocation> temps;       // inside the workspace, per layer from its start
  int64_t workspace_offset = 0;
  int64_t workspace_bytes = 0;
  int64_t arena_bytes = 0;

  const Allocation* find(std::string_view tensor) const;
  const Allocation& at(std::string_view tensor) const;
};

MemoryPlan plan_memory(const LayerGraph& graph);

/// A field of a layer's parameter record; every field is a 64-bit integer.
struct ParamField {
  std::string name;
  int64_t value = 0;
};

struct SubOp {
  std::string name;
  ComputeDef def;
  ScheduledNest sched;
};

struct LayerPlan {
  std::string name;
  LayerKind kind = LayerKind::relu;
  std::vector<SubOp> ops;  // run in order, one barrier after each
  std::vector<std::string> tensors;  // every tensor touched, first use first
  std::vector<ParamField> record;    // tensor offsets, then partition bounds
  std::vector<std::string> temps;     // workspace tensors
  int64_t temp_bytes = 0;
};

struct ProgramPlan {
  LayerGraph graph;
  MachineConfig machine;
  MemoryPlan memory;
  std::vector<LayerPlan> layers;     // topological order
  std::vector<std::string> outputs;  // layers nobody consumes, in order

  std::vector<TensorDecl> params() const;
};

/// Schedules every operator; propagates InfeasibleError.
ProgramPlan lower_graph(const LayerGraph& graph, const MachineConfig& machine);

/// Seeded data for graph inputs and parameters from one mt19937_64 stream:
/// inputs in declaration order, then each layer's parameters in topological
/// order. Reals: inputs U(-1, 1), parameters U(-s, s) with s = sqrt(6 / fan_in).
/// Integers: U{-2..2}.
template <class T>
TensorMap<T> seeded_data(const LayerGraph& graph, uint64_t seed);

/// Zero-filled graph inputs and parameters.
template <class T>
TensorMap<T> zero_data(const LayerGraph& graph);

}  // namespace swsched
