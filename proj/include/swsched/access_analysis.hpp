#pragma once

// Correlation between tensors and loop variables, sizevar/numvar/compvar
// classification with the per-tensor buffered-dimension frontier, and the
// tile footprint arithmetic shared by the planner, orderer and DMA inserter.

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "swsched/tensor_ir.hpp"

namespace swsched {

using VarSet = std::set<VarId>;
/// Per-variable tile extent; variables absent from the map have extent 1.
using BufferMap = std::map<VarId, int64_t>;
/// curBufDim per tensor: dimensions below it are fully inside the tile.
using Frontiers = std::vector<int>;

/// A tensor access as the analyses see it: the affine index of each
/// dimension plus the loop variables each dimension depends on (fused
/// parents resolve to the fused loop variable).
struct TensorView {
  std::string name;
  int elem_bytes = 4;
  std::vector<AffineIndex> indices;
  std::vector<std::vector<VarId>> dim_vars;
  bool is_output = false;

  static TensorView from_access(const TensorAccess& access);
  static TensorView from_access(const TensorAccess& access, const LoopNest& nest);

  int rank() const { return static_cast<int>(indices.size()); }
  bool dim_uses(int dim, VarId var) const;
  bool uses(VarId var) const;
};

/// Alg. "AnalyzeCorrelation": for each tensor, the universe variables that
/// occur in any of its indices.
std::vector<VarSet> analyze_correlation(const VarSet& universe, std::span<const TensorView> tensors);

enum class VarType { size, num, comp };
std::string_view to_string(VarType type);

struct VarClass {
  std::vector<VarId> sizevars, numvars, compvars;
};

/// sizeType if `var` indexes some tensor's frontier dimension and none above
/// it, numType if only dimensions above, compType if both. Throws
/// ScheduleError when `var` occurs at or above no tensor's frontier.
VarType var_type(VarId var, std::span<const TensorView> tensors, const Frontiers& frontiers);
/// Partitions `vars` by var_type, preserving input order inside each class.
VarClass classify(std::span<const VarId> vars, std::span<const TensorView> tensors,
                  const Frontiers& frontiers);

enum class Direction { up, down };

/// UP removes `var` from the sizing universe and advances each frontier past
/// every dimension whose variables all left the universe. DOWN re-adds it and
/// retreats each frontier to the lowest dimension below it that uses `var`.
void update(VarSet& var_set, std::span<const TensorView> tensors, Frontiers& frontiers, VarId var,
            Direction direction);

/// Frontiers for a fresh sizing universe (leading dimensions that depend on
/// no universe variable are already complete).
Frontiers initial_frontiers(const VarSet& var_set, std::span<const TensorView> tensors);

/// Span of one tile along an index: sum(coeff * (Buffer(v) - 1)) + 1.
int64_t buffered_extent(const AffineIndex& index, const BufferMap& buffer);

/// Bytes of all tiles: sum over tensors of elem_bytes * prod of spans.
int64_t ldm_usage(std::span<const TensorView> tensors, const BufferMap& buffer);
int64_t tile_bytes(const TensorView& tensor, const BufferMap& buffer);

}  // namespace swsched
