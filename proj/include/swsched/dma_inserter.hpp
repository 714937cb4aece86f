#pragma once

// Placement and shape of tile transfers.
//
// A descriptor moves one rectangular tile: `count` rows of `block_elems`
// contiguous elements, `stride_elems` apart in memory, repeated over the
// `planes` of the higher dimensions. The scratchpad side is packed densely
// in dimension order using the tile's runtime spans.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "swsched/tensor_ir.hpp"

namespace swsched {

enum class DmaDirection { get, put };
std::string_view to_string(DmaDirection d);

struct DmaPlane {
  int64_t count = 1;
  int64_t stride_elems = 0;

  friend bool operator==(const DmaPlane&, const DmaPlane&) = default;
};

struct DmaDescriptor {
  int access = 0;
  std::string tensor;
  DmaDirection direction = DmaDirection::get;
  int level = 0;  // 0 = before the outermost loop; L = inside loop L
  bool accumulate = false;
  std::string base_expr;
  std::vector<VarId> tile_vars;  // loops spanned by the tile
  std::vector<int64_t> spans;    // static tile span per dimension
  int merged_dims = 1;           // leading dimensions folded into one block
  int64_t block_elems = 1;
  int64_t stride_elems = 1;
  int64_t count = 1;
  std::vector<DmaPlane> planes;

  int64_t tile_elems() const;
  friend bool operator==(const DmaDescriptor&, const DmaDescriptor&) = default;
};

struct TileGeometry {
  std::string base_expr;
  std::vector<int64_t> spans;
};

/// Tile origin with `inner` loops at zero and the outer loops symbolic, and
/// the static span of each dimension.
TileGeometry tile_geometry(const LoopNest& nest, int access, std::span<const VarId> inner);

/// Descriptors for each access in `buffered`. nest.order()[0, num_outer) are
/// the outer loops. An access's tile spans its buffer annotation, or every
/// inner loop it uses when unannotated. Throws ScheduleError when a tile loop
/// is an outer loop, or when the access depends on an inner loop outside its
/// tile.
std::vector<DmaDescriptor> insert_dma(const LoopNest& nest, int num_outer,
                                      std::span<const int> buffered);

/// Folds leading dimensions that the tile covers completely (at every outer
/// iteration, remainders included) into one block. Idempotent.
std::vector<DmaDescriptor> coalesce(const LoopNest& nest, std::vector<DmaDescriptor> descriptors);

/// Trip count of `var` given the values of the loops enclosing it; handles
/// the short last iteration of non-dividing splits.
int64_t loop_cap(const LoopNest& nest, VarId var, std::span<const int64_t> values);
/// True when loop_cap(var) equals var's extent for every enclosing value.
bool cap_is_static(const LoopNest& nest, VarId var);

/// Concrete transfer of one descriptor at one outer iteration.
struct DmaTransfer {
  int64_t mem_offset = 0;  // elements into the flat tensor
  std::vector<int64_t> spans;
  int64_t block_elems = 0, stride_elems = 0, count = 0;
  std::vector<DmaPlane> planes;

  int64_t elems() const;
};

/// `values` holds every outer loop, the PE loop and the derived variables,
/// with tile loops at zero.
DmaTransfer resolve_transfer(const LoopNest& nest, const DmaDescriptor& d,
                             std::span<const int64_t> values);

/// Executions of all descriptors summed over PEs, in closed form: each runs
/// once per iteration of the loops enclosing its level. Idle PEs add zero.
int64_t predict_dma_execs(const LoopNest& nest, int num_outer,
                          std::span<const DmaDescriptor> descriptors, int num_pes);

nlohmann::json to_json(const DmaDescriptor& d);

}  // namespace swsched
