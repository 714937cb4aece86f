#include "swsched/access_analysis.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "swsched/error.hpp"

namespace swsched {

TensorView TensorView::from_access(const TensorAccess& access) {
  TensorView v;
  v.name = access.tensor.name;
  v.elem_bytes = swsched::elem_bytes(access.tensor.elem);
  v.indices = access.indices;
  v.is_output = access.mode != AccessMode::read;
  for (const auto& idx : access.indices) {
    std::vector<VarId> vars;
    for (const auto& t : idx.terms) vars.push_back(t.var);
    v.dim_vars.push_back(std::move(vars));
  }
  return v;
}

TensorView TensorView::from_access(const TensorAccess& access, const LoopNest& nest) {
  TensorView v = from_access(access);
  for (size_t d = 0; d < v.indices.size(); ++d) {
    std::vector<VarId> vars;
    for (const auto& t : v.indices[d].terms)
      for (VarId leaf : nest.leaves_of(t.var))
        if (std::find(vars.begin(), vars.end(), leaf) == vars.end()) vars.push_back(leaf);
    v.dim_vars[d] = std::move(vars);
  }
  return v;
}

bool TensorView::dim_uses(int dim, VarId var) const {
  const auto& vs = dim_vars[dim];
  return std::find(vs.begin(), vs.end(), var) != vs.end();
}

bool TensorView::uses(VarId var) const {
  for (int d = 0; d < rank(); ++d)
    if (dim_uses(d, var)) return true;
  return false;
}

std::vector<VarSet> analyze_correlation(const VarSet& universe, std::span<const TensorView> tensors) {
  std::vector<VarSet> out(tensors.size());
  for (size_t t = 0; t < tensors.size(); ++t)
    for (const auto& dim : tensors[t].dim_vars)
      for (VarId v : dim)
        if (universe.count(v)) out[t].insert(v);
  return out;
}

std::string_view to_string(VarType type) {
  switch (type) {
    case VarType::size: return "sizevar";
    case VarType::num: return "numvar";
    case VarType::comp: return "compvar";
  }
  return "?";
}

VarType var_type(VarId var, std::span<const TensorView> tensors, const Frontiers& frontiers) {
  bool size_flag = false;
  bool num_flag = false;
  for (size_t t = 0; t < tensors.size(); ++t) {
    const auto& tensor = tensors[t];
    const int cur = frontiers[t];
    if (cur < tensor.rank() && tensor.dim_uses(cur, var)) size_flag = true;
    for (int d = cur + 1; d < tensor.rank(); ++d)
      if (tensor.dim_uses(d, var)) num_flag = true;
  }
  if (size_flag) return num_flag ? VarType::comp : VarType::size;
  if (num_flag) return VarType::num;
  throw ScheduleError(fmt::format("variable #{} is correlated with no unbuffered tensor dimension",
                                  var.value));
}

VarClass classify(std::span<const VarId> vars, std::span<const TensorView> tensors,
                  const Frontiers& frontiers) {
  VarClass out;
  for (VarId v : vars) {
    switch (var_type(v, tensors, frontiers)) {
      case VarType::size: out.sizevars.push_back(v); break;
      case VarType::num: out.numvars.push_back(v); break;
      case VarType::comp: out.compvars.push_back(v); break;
    }
  }
  return out;
}

namespace {

int advance(const TensorView& tensor, const VarSet& var_set, int from) {
  int dim = from;
  // Stop at the first dimension that still depends on a universe variable.
  while (dim < tensor.rank()) {
    bool blocked = false;
    for (VarId v : tensor.dim_vars[dim])
      if (var_set.count(v)) blocked = true;
    if (blocked) break;
    ++dim;
  }
  return dim;
}

}  // namespace

void update(VarSet& var_set, std::span<const TensorView> tensors, Frontiers& frontiers, VarId var,
            Direction direction) {
  if (direction == Direction::up) {
    var_set.erase(var);
  } else {
    var_set.insert(var);
  }
  for (size_t t = 0; t < tensors.size(); ++t) {
    if (direction == Direction::up) {
      frontiers[t] = advance(tensors[t], var_set, frontiers[t]);
    } else {
      for (int d = 0; d < frontiers[t]; ++d) {
        if (tensors[t].dim_uses(d, var)) {
          frontiers[t] = d;
          break;
        }
      }
    }
  }
}

Frontiers initial_frontiers(const VarSet& var_set, std::span<const TensorView> tensors) {
  Frontiers f(tensors.size(), 0);
  for (size_t t = 0; t < tensors.size(); ++t) f[t] = advance(tensors[t], var_set, 0);
  return f;
}

int64_t buffered_extent(const AffineIndex& index, const BufferMap& buffer) {
  int64_t span = 1;
  for (const auto& t : index.terms) {
    auto it = buffer.find(t.var);
    const int64_t b = it == buffer.end() ? 1 : it->second;
    span += t.coeff * (b - 1);
  }
  return span;
}

int64_t tile_bytes(const TensorView& tensor, const BufferMap& buffer) {
  int64_t elems = 1;
  for (const auto& idx : tensor.indices) elems *= buffered_extent(idx, buffer);
  return elems * tensor.elem_bytes;
}

int64_t ldm_usage(std::span<const TensorView> tensors, const BufferMap& buffer) {
  int64_t total = 0;
  for (const auto& t : tensors) total += tile_bytes(t, buffer);
  return total;
}

}  // namespace swsched
