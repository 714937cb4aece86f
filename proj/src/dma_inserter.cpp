#include "swsched/dma_inserter.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <fmt/format.h>

#include "swsched/error.hpp"

namespace swsched {

std::string_view to_string(DmaDirection d) { return d == DmaDirection::get ? "get" : "put"; }

int64_t DmaDescriptor::tile_elems() const {
  int64_t n = block_elems * count;
  for (const auto& p : planes) n *= p.count;
  return n;
}

int64_t DmaTransfer::elems() const {
  int64_t n = block_elems * count;
  for (const auto& p : planes) n *= p.count;
  return n;
}

int64_t loop_cap(const LoopNest& nest, VarId var, std::span<const int64_t> values) {
  const IterVar& v = nest.var(var);
  if (v.origin == VarOrigin::root || v.origin == VarOrigin::fused) return v.extent;
  const SplitRel* s = nest.split_producing(var);
  const int64_t parent = loop_cap(nest, s->parent, values);
  if (v.origin == VarOrigin::split_outer) return (parent + s->factor - 1) / s->factor;
  return std::min(s->factor, parent - values[s->outer.value] * s->factor);
}

bool cap_is_static(const LoopNest& nest, VarId var) {
  const IterVar& v = nest.var(var);
  if (v.origin == VarOrigin::root || v.origin == VarOrigin::fused) return true;
  const SplitRel* s = nest.split_producing(var);
  if (!cap_is_static(nest, s->parent)) return false;
  return v.origin == VarOrigin::split_outer || nest.var(s->parent).extent % s->factor == 0;
}

namespace {

bool contains(std::span<const VarId> vs, VarId v) {
  return std::find(vs.begin(), vs.end(), v) != vs.end();
}

std::vector<int64_t> static_spans(const LoopNest& nest, const TensorAccess& acc,
                                  std::span<const VarId> tile) {
  std::vector<int64_t> spans;
  for (const auto& idx : acc.indices) {
    int64_t s = 1;
    for (const auto& t : idx.terms)
      if (contains(tile, t.var)) s += t.coeff * (nest.var(t.var).extent - 1);
    spans.push_back(s);
  }
  return spans;
}

// Block / count / stride / planes for a tile whose first `merged` dims form the block.
template <class Out>
void shape_transfer(const TensorDecl& t, std::span<const int64_t> spans, int merged, Out& out) {
  const int rank = t.rank();
  out.block_elems = 1;
  for (int d = 0; d < merged; ++d) out.block_elems *= spans[d];
  out.count = merged < rank ? spans[merged] : 1;
  out.stride_elems = merged < rank ? t.pitch(merged) : out.block_elems;
  out.planes.clear();
  for (int d = merged + 1; d < rank; ++d) out.planes.push_back(DmaPlane{spans[d], t.pitch(d)});
}

std::string format_base(const LoopNest& nest, const TensorAccess& acc, std::span<const VarId> tile) {
  std::map<VarId, int64_t> coeff;
  int64_t constant = 0;
  for (int d = 0; d < acc.tensor.rank(); ++d) {
    const int64_t pitch = acc.tensor.pitch(d);
    constant += pitch * acc.indices[d].constant;
    for (const auto& t : acc.indices[d].terms)
      if (!contains(tile, t.var)) coeff[t.var] += pitch * t.coeff;
  }
  std::string out;
  for (const auto& [v, c] : coeff) {
    if (!out.empty()) out += " + ";
    out += c == 1 ? nest.var(v).name : fmt::format("{}*{}", c, nest.var(v).name);
  }
  if (out.empty()) return fmt::format("{}", constant);
  if (constant != 0) out += fmt::format(" + {}", constant);
  return out;
}

std::vector<VarId> leaves_used(const LoopNest& nest, const TensorAccess& acc) {
  std::vector<VarId> out;
  for (const auto& idx : acc.indices)
    for (const auto& t : idx.terms)
      for (VarId l : nest.leaves_of(t.var))
        if (!contains(out, l)) out.push_back(l);
  return out;
}

}  // namespace

TileGeometry tile_geometry(const LoopNest& nest, int access, std::span<const VarId> inner) {
  const auto& acc = nest.accesses().at(access);
  return TileGeometry{format_base(nest, acc, inner), static_spans(nest, acc, inner)};
}

std::vector<DmaDescriptor> insert_dma(const LoopNest& nest, int num_outer,
                                      std::span<const int> buffered) {
  const auto& order = nest.order();
  const std::span<const VarId> inner(order.begin() + num_outer, order.end());
  std::vector<DmaDescriptor> out;
  for (int a : buffered) {
    const auto& acc = nest.accesses().at(a);
    const std::vector<VarId> iters = leaves_used(nest, acc);
    std::vector<VarId> sub;
    if (auto it = nest.buffered().find(a); it != nest.buffered().end()) {
      for (VarId v : it->second)
        for (VarId l : nest.leaves_of(v))
          if (!contains(sub, l)) sub.push_back(l);
    } else {
      for (VarId v : iters)
        if (contains(inner, v)) sub.push_back(v);
    }
    std::set<VarId> pending;
    for (VarId v : iters)
      if (!contains(sub, v) && contains(order, v)) pending.insert(v);

    int level = 0;
    bool reduction_outside = false;
    for (int i = 0; !pending.empty(); ++i) {
      if (i >= num_outer)
        throw ScheduleError(fmt::format("'{}' depends on inner loop '{}' outside its tile",
                                        acc.tensor.name, nest.var(order[i]).name));
      if (contains(sub, order[i]))
        throw ScheduleError(fmt::format("tile loop '{}' of '{}' is an outer loop",
                                        nest.var(order[i]).name, acc.tensor.name));
      pending.erase(order[i]);
      reduction_outside = reduction_outside || nest.var(order[i]).kind == VarKind::reduction;
      level = i + 1;
    }

    DmaDescriptor d;
    d.access = a;
    d.tensor = acc.tensor.name;
    d.level = level;
    d.accumulate = a == LoopNest::output_access && reduction_outside;
    d.tile_vars = sub;
    d.base_expr = format_base(nest, acc, sub);
    d.spans = static_spans(nest, acc, sub);
    d.merged_dims = 1;
    shape_transfer(acc.tensor, d.spans, 1, d);
    if (a == LoopNest::output_access) {
      if (d.accumulate) {
        d.direction = DmaDirection::get;
        out.push_back(d);
      }
      d.direction = DmaDirection::put;
    } else {
      d.direction = DmaDirection::get;
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<DmaDescriptor> coalesce(const LoopNest& nest, std::vector<DmaDescriptor> descriptors) {
  for (auto& d : descriptors) {
    const auto& acc = nest.accesses().at(d.access);
    const auto& t = acc.tensor;
    auto full = [&](int dim) {
      const auto& idx = acc.indices[dim];
      if (idx.constant != 0 || d.spans[dim] != t.shape[dim]) return false;
      for (const auto& term : idx.terms)
        if (!contains(d.tile_vars, term.var) || !cap_is_static(nest, term.var)) return false;
      return true;
    };
    int m = 1;
    while (m < t.rank() && full(m - 1)) ++m;
    d.merged_dims = m;
    shape_transfer(t, d.spans, m, d);
  }
  return descriptors;
}

DmaTransfer resolve_transfer(const LoopNest& nest, const DmaDescriptor& d,
                             std::span<const int64_t> values) {
  const auto& acc = nest.accesses().at(d.access);
  DmaTransfer x;
  for (int dim = 0; dim < acc.tensor.rank(); ++dim) {
    const auto& idx = acc.indices[dim];
    x.mem_offset += acc.tensor.pitch(dim) * idx.evaluate([&](VarId v) { return values[v.value]; });
    int64_t s = 1;
    for (const auto& t : idx.terms)
      if (contains(d.tile_vars, t.var)) s += t.coeff * (loop_cap(nest, t.var, values) - 1);
    x.spans.push_back(s);
  }
  shape_transfer(acc.tensor, x.spans, d.merged_dims, x);
  return x;
}

int64_t predict_dma_execs(const LoopNest& nest, int num_outer,
                          std::span<const DmaDescriptor> descriptors, int num_pes) {
  const auto pe_var = nest.parallel_var();
  const int64_t active = pe_var ? std::min<int64_t>(num_pes, nest.var(*pe_var).extent) : 1;
  std::vector<int64_t> values(nest.vars().size(), 0);
  int64_t total = 0;
  for (int64_t pe = 0; pe < active; ++pe) {
    if (pe_var) values[pe_var->value] = pe;
    std::vector<int64_t> visits(num_outer + 1, 1);
    for (int i = 0; i < num_outer; ++i)
      visits[i + 1] = visits[i] * std::max<int64_t>(0, loop_cap(nest, nest.order()[i], values));
    for (const auto& d : descriptors) total += visits[d.level];
  }
  return total;
}

nlohmann::json to_json(const DmaDescriptor& d) {
  nlohmann::json planes = nlohmann::json::array();
  for (const auto& p : d.planes) planes.push_back({{"count", p.count}, {"stride_elems", p.stride_elems}});
  return {{"tensor", d.tensor},      {"direction", to_string(d.direction)},
          {"level", d.level},        {"accumulate", d.accumulate},
          {"base", d.base_expr},     {"spans", d.spans},
          {"merged_dims", d.merged_dims}, {"block_elems", d.block_elems},
          {"stride_elems", d.stride_elems}, {"count", d.count},
          {"planes", planes}};
}

}  // namespace swsched
