#include "swsched/tensor_ir.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "swsched/error.hpp"

namespace swsched {

int elem_bytes(ElemKind kind) {
  switch (kind) {
    case ElemKind::f32:
    case ElemKind::i32:
      return 4;
  }
  return 4;
}

std::string_view to_string(ElemKind kind) { return kind == ElemKind::f32 ? "f32" : "i32"; }

ElemKind parse_elem_kind(std::string_view text) {
  if (text == "f32") return ElemKind::f32;
  if (text == "i32") return ElemKind::i32;
  throw ParseError(fmt::format("unknown element kind '{}'", text));
}

std::string_view to_string(ReduceKind kind) {
  switch (kind) {
    case ReduceKind::none: return "none";
    case ReduceKind::sum: return "sum";
    case ReduceKind::max: return "max";
  }
  return "none";
}

std::string_view to_string(Epilogue kind) {
  switch (kind) {
    case Epilogue::none: return "none";
    case Epilogue::relu: return "relu";
    case Epilogue::bias: return "bias";
    case Epilogue::bias_relu: return "bias_relu";
  }
  return "none";
}

int64_t TensorDecl::num_elems() const {
  return std::accumulate(shape.begin(), shape.end(), int64_t{1}, std::multiplies<>());
}

int64_t TensorDecl::pitch(int dim) const {
  int64_t p = 1;
  for (int d = 0; d < dim; ++d) p *= shape[d];
  return p;
}

const TensorDecl& TensorRegistry::declare_tensor(std::string name, std::vector<int64_t> shape,
                                                 ElemKind elem) {
  if (name.empty()) throw IrError("tensor name must not be empty");
  if (find(name)) throw IrError(fmt::format("duplicate tensor '{}'", name));
  if (shape.empty()) throw IrError(fmt::format("tensor '{}' has no dimensions", name));
  for (auto e : shape)
    if (e < 1) throw IrError(fmt::format("tensor '{}' has extent {} < 1", name, e));
  tensors_.push_back(TensorDecl{std::move(name), std::move(shape), elem});
  return tensors_.back();
}

const TensorDecl* TensorRegistry::find(std::string_view name) const {
  for (const auto& t : tensors_)
    if (t.name == name) return &t;
  return nullptr;
}

const TensorDecl& TensorRegistry::at(std::string_view name) const {
  if (auto* t = find(name)) return *t;
  throw IrError(fmt::format("unknown tensor '{}'", name));
}

AffineIndex AffineIndex::of(VarId var, int64_t coeff) {
  AffineIndex idx;
  idx.add(var, coeff);
  return idx;
}

AffineIndex AffineIndex::constant_index(int64_t value) {
  AffineIndex idx;
  idx.constant = value;
  return idx;
}

int64_t AffineIndex::coeff(VarId var) const {
  for (const auto& t : terms)
    if (t.var == var) return t.coeff;
  return 0;
}

AffineIndex& AffineIndex::add(VarId var, int64_t c) {
  if (c < 0) throw IrError("negative affine coefficients are not supported");
  if (c == 0) return *this;
  for (auto& t : terms) {
    if (t.var == var) {
      t.coeff += c;
      return *this;
    }
  }
  terms.push_back({var, c});
  return *this;
}

AffineIndex AffineIndex::substitute(VarId var, const AffineIndex& replacement) const {
  const int64_t c = coeff(var);
  if (c == 0) return *this;
  AffineIndex out;
  out.constant = constant + c * replacement.constant;
  for (const auto& t : terms) {
    if (t.var == var) {
      for (const auto& r : replacement.terms) out.add(r.var, c * r.coeff);
    } else {
      out.add(t.var, t.coeff);
    }
  }
  return out;
}

Expr Expr::load(int input) {
  Expr e;
  e.op = Op::load;
  e.input = input;
  return e;
}

Expr Expr::constant(double value) {
  Expr e;
  e.op = Op::constant;
  e.value = value;
  return e;
}

namespace {

Expr binary(Expr::Op op, Expr a, Expr b) {
  Expr e;
  e.op = op;
  e.args.push_back(std::move(a));
  e.args.push_back(std::move(b));
  return e;
}

void collect_loads(const Expr& e, std::vector<int>& out) {
  if (e.op == Expr::Op::load) out.push_back(e.input);
  for (const auto& a : e.args) collect_loads(a, out);
}

}  // namespace

Expr Expr::add(Expr a, Expr b) { return binary(Op::add, std::move(a), std::move(b)); }
Expr Expr::mul(Expr a, Expr b) { return binary(Op::mul, std::move(a), std::move(b)); }
Expr Expr::max(Expr a, Expr b) { return binary(Op::max, std::move(a), std::move(b)); }

Expr Expr::select(Expr cond, Expr a, Expr b) {
  Expr e;
  e.op = Op::select;
  e.args.push_back(std::move(cond));
  e.args.push_back(std::move(a));
  e.args.push_back(std::move(b));
  return e;
}

VarId ComputeDef::find_var(std::string_view var_name) const {
  for (size_t i = 0; i < vars.size(); ++i)
    if (vars[i].name == var_name) return VarId{static_cast<int>(i)};
  throw IrError(fmt::format("compute '{}' has no variable '{}'", name, var_name));
}

namespace {

void validate_access(const ComputeDef& def, const TensorAccess& acc, const char* role) {
  const auto& t = acc.tensor;
  if (static_cast<int>(acc.indices.size()) != t.rank())
    throw IrError(fmt::format("{}: {} access to '{}' has {} indices for rank {}", def.name, role,
                              t.name, acc.indices.size(), t.rank()));
  for (int d = 0; d < t.rank(); ++d) {
    const auto& idx = acc.indices[d];
    if (idx.constant < 0) throw IrError(fmt::format("{}: negative index constant", def.name));
    std::set<int> seen;
    int64_t max_index = idx.constant;
    for (const auto& term : idx.terms) {
      if (!term.var.valid() || term.var.value >= static_cast<int>(def.vars.size()))
        throw IrError(fmt::format("{}: index of '{}' uses an undeclared variable", def.name, t.name));
      if (term.coeff < 0) throw IrError(fmt::format("{}: negative coefficient", def.name));
      if (!seen.insert(term.var.value).second)
        throw IrError(fmt::format("{}: variable repeated in one index", def.name));
      max_index += term.coeff * (def.vars[term.var.value].extent - 1);
    }
    if (max_index >= t.shape[d])
      throw IrError(fmt::format("{}: {} access to '{}' dim {} reaches {} >= extent {}", def.name,
                                role, t.name, d, max_index, t.shape[d]));
  }
}

}  // namespace

void ComputeDef::validate() const {
  std::set<std::string> names;
  for (const auto& v : vars) {
    if (v.extent < 1) throw IrError(fmt::format("{}: variable '{}' has extent < 1", name, v.name));
    if (!names.insert(v.name).second)
      throw IrError(fmt::format("{}: duplicate variable '{}'", name, v.name));
  }
  validate_access(*this, output, "output");
  for (const auto& in : inputs) validate_access(*this, in, "input");
  if (bias) validate_access(*this, *bias, "bias");

  bool any_reduce_var = false;
  for (size_t i = 0; i < vars.size(); ++i) {
    if (vars[i].kind != VarKind::reduction) continue;
    any_reduce_var = true;
    const VarId id{static_cast<int>(i)};
    for (const auto& idx : output.indices)
      if (idx.uses(id))
        throw IrError(fmt::format("{}: reduce variable '{}' indexes the output", name, vars[i].name));
    if (bias)
      for (const auto& idx : bias->indices)
        if (idx.uses(id))
          throw IrError(fmt::format("{}: reduce variable '{}' indexes the bias", name, vars[i].name));
  }
  if (any_reduce_var && reduce == ReduceKind::none)
    throw IrError(fmt::format("{}: reduce variables without a reduction", name));

  std::vector<int> loads;
  collect_loads(expr, loads);
  for (int l : loads)
    if (l < 0 || l >= static_cast<int>(inputs.size()))
      throw IrError(fmt::format("{}: expression loads undeclared input {}", name, l));
  if (has_bias(epilogue) != bias.has_value())
    throw IrError(fmt::format("{}: a bias access must come with a bias epilogue", name));
}

// ---------------------------------------------------------------------------
// LoopNest

LoopNest::LoopNest(ComputeDef def) : def_(std::move(def)) {
  def_.validate();
  vars_ = def_.vars;
  for (size_t i = 0; i < vars_.size(); ++i) order_.push_back(VarId{static_cast<int>(i)});
  accesses_.push_back(def_.output);
  accesses_.back().mode = AccessMode::write;
  for (const auto& in : def_.inputs) {
    accesses_.push_back(in);
    accesses_.back().mode = AccessMode::read;
  }
  if (def_.bias) {
    accesses_.push_back(*def_.bias);
    accesses_.back().mode = AccessMode::read;
  }
}

const IterVar& LoopNest::var(VarId id) const {
  if (!id.valid() || id.value >= static_cast<int>(vars_.size()))
    throw IrError(fmt::format("invalid variable id {}", id.value));
  return vars_[id.value];
}

std::optional<VarId> LoopNest::try_find(std::string_view name) const {
  for (size_t i = 0; i < vars_.size(); ++i)
    if (vars_[i].name == name) return VarId{static_cast<int>(i)};
  return std::nullopt;
}

VarId LoopNest::find(std::string_view name) const {
  if (auto id = try_find(name)) return *id;
  throw IrError(fmt::format("variable '{}' not found in nest '{}'", name, def_.name));
}

std::optional<int> LoopNest::bias_access() const {
  if (!def_.bias) return std::nullopt;
  return 1 + num_inputs();
}

int LoopNest::access_index(std::string_view tensor) const {
  for (size_t i = 0; i < accesses_.size(); ++i)
    if (accesses_[i].tensor.name == tensor) return static_cast<int>(i);
  throw IrError(fmt::format("tensor '{}' is not accessed by '{}'", tensor, def_.name));
}

const SplitRel* LoopNest::split_producing(VarId child) const {
  for (const auto& r : relations_)
    if (auto* s = std::get_if<SplitRel>(&r); s && (s->outer == child || s->inner == child)) return s;
  return nullptr;
}

const SplitRel* LoopNest::split_of(VarId parent) const {
  for (const auto& r : relations_)
    if (auto* s = std::get_if<SplitRel>(&r); s && s->parent == parent) return s;
  return nullptr;
}

const FuseRel* LoopNest::fuse_producing(VarId fused) const {
  for (const auto& r : relations_)
    if (auto* f = std::get_if<FuseRel>(&r); f && f->fused == fused) return f;
  return nullptr;
}

const FuseRel* LoopNest::fuse_of(VarId parent) const {
  for (const auto& r : relations_)
    if (auto* f = std::get_if<FuseRel>(&r); f && (f->outer == parent || f->inner == parent)) return f;
  return nullptr;
}

bool LoopNest::is_leaf(VarId id) const { return !split_of(id) && !fuse_of(id); }

bool LoopNest::is_live(VarId id) const {
  if (parallel_ && *parallel_ == id) return true;
  return std::find(order_.begin(), order_.end(), id) != order_.end();
}

std::vector<VarId> LoopNest::leaves_of(VarId id) const {
  if (const auto* s = split_of(id)) {
    auto out = leaves_of(s->outer);
    auto in = leaves_of(s->inner);
    out.insert(out.end(), in.begin(), in.end());
    return out;
  }
  if (const auto* f = fuse_of(id)) return leaves_of(f->fused);
  return {id};
}

void LoopNest::evaluate_vars(std::span<int64_t> values) const {
  for (auto it = relations_.rbegin(); it != relations_.rend(); ++it) {
    if (const auto* s = std::get_if<SplitRel>(&*it)) {
      values[s->parent.value] = values[s->outer.value] * s->factor + values[s->inner.value];
    } else {
      const auto& f = std::get<FuseRel>(*it);
      const int64_t inner_extent = vars_[f.inner.value].extent;
      values[f.outer.value] = values[f.fused.value] / inner_extent;
      values[f.inner.value] = values[f.fused.value] % inner_extent;
    }
  }
}

bool LoopNest::in_bounds(std::span<const int64_t> values) const {
  for (const auto& r : relations_)
    if (const auto* s = std::get_if<SplitRel>(&r); s && s->guarded)
      if (values[s->parent.value] >= vars_[s->parent.value].extent) return false;
  return true;
}

struct NestEditor {
  static VarId add_var(LoopNest& n, IterVar v) {
    if (n.try_find(v.name)) throw IrError(fmt::format("variable name '{}' already in use", v.name));
    n.vars_.push_back(std::move(v));
    return VarId{static_cast<int>(n.vars_.size() - 1)};
  }

  static size_t position(const LoopNest& n, VarId id) {
    auto it = std::find(n.order_.begin(), n.order_.end(), id);
    if (it == n.order_.end())
      throw IrError(fmt::format("variable '{}' is not a loop of nest '{}'", n.var(id).name,
                                n.def_.name));
    return static_cast<size_t>(it - n.order_.begin());
  }

  static SplitResult split(const LoopNest& nest, VarId var, int64_t factor, std::string outer_name,
                           std::string inner_name) {
    if (factor < 1) throw IrError(fmt::format("split factor {} < 1", factor));
    LoopNest n = nest;
    const size_t pos = position(n, var);
    if (n.buffered_.size())
      for (const auto& [acc, vs] : n.buffered_)
        if (std::find(vs.begin(), vs.end(), var) != vs.end())
          throw IrError("cannot split a variable already used by a buffer annotation");
    const IterVar parent = n.var(var);
    IterVar outer{outer_name.empty() ? parent.name + "o" : std::move(outer_name),
                  (parent.extent + factor - 1) / factor, parent.kind, VarOrigin::split_outer, {var}};
    IterVar inner{inner_name.empty() ? parent.name + "i" : std::move(inner_name), factor,
                  parent.kind, VarOrigin::split_inner, {var}};
    const VarId o = add_var(n, std::move(outer));
    const VarId i = add_var(n, std::move(inner));
    n.relations_.push_back(SplitRel{var, o, i, factor, parent.extent % factor != 0});
    n.order_[pos] = o;
    n.order_.insert(n.order_.begin() + static_cast<long>(pos) + 1, i);

    AffineIndex repl = AffineIndex::of(o, factor);
    repl.add(i, 1);
    for (auto& acc : n.accesses_)
      for (auto& idx : acc.indices) idx = idx.substitute(var, repl);
    return SplitResult{std::move(n), o, i};
  }

  static FuseResult fuse(const LoopNest& nest, VarId v1, VarId v2) {
    LoopNest n = nest;
    const size_t p1 = position(n, v1);
    const size_t p2 = position(n, v2);
    if (p2 != p1 + 1)
      throw IrError(fmt::format("fuse: '{}' does not immediately enclose '{}'", n.var(v1).name,
                                n.var(v2).name));
    const auto& a = n.var(v1);
    const auto& b = n.var(v2);
    if (a.kind != b.kind) throw IrError("fuse: cannot fuse spatial with reduction variables");
    IterVar f{a.name + "." + b.name, a.extent * b.extent, a.kind, VarOrigin::fused, {v1, v2}};
    const VarId id = add_var(n, std::move(f));
    n.relations_.push_back(FuseRel{v1, v2, id});
    n.order_[p1] = id;
    n.order_.erase(n.order_.begin() + static_cast<long>(p2));
    return FuseResult{std::move(n), id};
  }

  static LoopNest reorder(const LoopNest& nest, std::span<const VarId> order) {
    std::vector<VarId> a(order.begin(), order.end());
    std::vector<VarId> b = nest.order_;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) throw IrError("reorder: order is not a permutation of the nest's loops");
    LoopNest n = nest;
    n.order_.assign(order.begin(), order.end());
    return n;
  }

  static LoopNest buffer(const LoopNest& nest, std::string_view tensor, std::span<const VarId> vars,
                         bool write) {
    LoopNest n = nest;
    int acc = -1;
    for (size_t i = 0; i < n.accesses_.size(); ++i) {
      if (n.accesses_[i].tensor.name != tensor) continue;
      const bool is_write = n.accesses_[i].mode != AccessMode::read;
      if (is_write == write) {
        acc = static_cast<int>(i);
        break;
      }
    }
    if (acc < 0)
      throw IrError(fmt::format("buffer_{}: '{}' is not {} by nest '{}'", write ? "write" : "read",
                                tensor, write ? "written" : "read", n.def_.name));
    for (VarId v : vars) {
      const std::array<VarId, 1> one{v};
      if (dims_indexed_by(n, n.accesses_[acc], one).empty())
        throw IrError(fmt::format("buffer_{}: variable '{}' is uncorrelated with '{}'",
                                  write ? "write" : "read", n.var(v).name, tensor));
    }
    n.buffered_[acc] = std::vector<VarId>(vars.begin(), vars.end());
    return n;
  }

  static LoopNest bind(const LoopNest& nest, VarId var) {
    LoopNest n = nest;
    if (n.parallel_) throw IrError("nest already has a parallel variable");
    const size_t pos = position(n, var);
    if (n.var(var).kind != VarKind::spatial)
      throw IrError("only spatial variables can be bound to processing elements");
    n.order_.erase(n.order_.begin() + static_cast<long>(pos));
    n.parallel_ = var;
    return n;
  }
};

SplitResult split(const LoopNest& nest, VarId var, int64_t factor, std::string outer_name,
                  std::string inner_name) {
  return NestEditor::split(nest, var, factor, std::move(outer_name), std::move(inner_name));
}

FuseResult fuse(const LoopNest& nest, VarId v1, VarId v2) { return NestEditor::fuse(nest, v1, v2); }

LoopNest reorder(const LoopNest& nest, std::span<const VarId> order) {
  return NestEditor::reorder(nest, order);
}

LoopNest buffer_read(const LoopNest& nest, std::string_view tensor, std::span<const VarId> vars) {
  return NestEditor::buffer(nest, tensor, vars, false);
}

LoopNest buffer_write(const LoopNest& nest, std::string_view tensor, std::span<const VarId> vars) {
  return NestEditor::buffer(nest, tensor, vars, true);
}

LoopNest bind_parallel(const LoopNest& nest, VarId var) { return NestEditor::bind(nest, var); }

std::vector<int> dims_indexed_by(const LoopNest& nest, const TensorAccess& access,
                                 std::span<const VarId> vars) {
  std::set<VarId> wanted;
  for (VarId v : vars)
    for (VarId l : nest.leaves_of(v)) wanted.insert(l);
  std::vector<int> dims;
  for (int d = 0; d < access.tensor.rank(); ++d) {
    bool hit = false;
    for (const auto& t : access.indices[d].terms) {
      for (VarId l : nest.leaves_of(t.var))
        if (wanted.count(l)) hit = true;
    }
    if (hit) dims.push_back(d);
  }
  return dims;
}

// ---------------------------------------------------------------------------
// Naive interpretation

template <class T>
T init_value(double value) {
  if constexpr (std::is_floating_point_v<T>) {
    return static_cast<T>(value);
  } else {
    if (std::isinf(value))
      return value < 0 ? std::numeric_limits<T>::lowest() : std::numeric_limits<T>::max();
    return static_cast<T>(value);
  }
}

template <class T>
T eval_expr(const Expr& e, std::span<const T> loaded) {
  switch (e.op) {
    case Expr::Op::load: return loaded[e.input];
    case Expr::Op::constant: return init_value<T>(e.value);
    case Expr::Op::add: return eval_expr<T>(e.args[0], loaded) + eval_expr<T>(e.args[1], loaded);
    case Expr::Op::mul: return eval_expr<T>(e.args[0], loaded) * eval_expr<T>(e.args[1], loaded);
    case Expr::Op::max: {
      const T a = eval_expr<T>(e.args[0], loaded);
      const T b = eval_expr<T>(e.args[1], loaded);
      return a < b ? b : a;
    }
    case Expr::Op::select:
      return eval_expr<T>(e.args[0], loaded) > T(0) ? eval_expr<T>(e.args[1], loaded)
                                                     : eval_expr<T>(e.args[2], loaded);
  }
  return T(0);
}

namespace {

int64_t flat_index(const TensorAccess& acc, std::span<const int64_t> values) {
  int64_t flat = 0;
  int64_t pitch = 1;
  for (int d = 0; d < acc.tensor.rank(); ++d) {
    const int64_t i = acc.indices[d].evaluate([&](VarId v) { return values[v.value]; });
    if (i < 0 || i >= acc.tensor.shape[d])
      throw IrError(fmt::format("interpret: index {} out of range for '{}' dim {}", i,
                                acc.tensor.name, d));
    flat += i * pitch;
    pitch *= acc.tensor.shape[d];
  }
  return flat;
}

template <class T>
std::vector<T>& ensure_tensor(TensorMap<T>& data, const TensorDecl& t) {
  auto it = data.find(t.name);
  if (it == data.end()) it = data.emplace(t.name, std::vector<T>(t.num_elems(), T(0))).first;
  if (static_cast<int64_t>(it->second.size()) != t.num_elems())
    throw IrError(fmt::format("tensor '{}' data has {} elements, expected {}", t.name,
                              it->second.size(), t.num_elems()));
  return it->second;
}

}  // namespace

template <class T>
void interpret(const LoopNest& nest, TensorMap<T>& data) {
  const auto& def = nest.def();
  const auto& accesses = nest.accesses();
  std::vector<std::vector<T>*> buffers;
  for (const auto& acc : accesses) buffers.push_back(&ensure_tensor(data, acc.tensor));

  std::vector<VarId> loops;
  if (nest.parallel_var()) loops.push_back(*nest.parallel_var());
  loops.insert(loops.end(), nest.order().begin(), nest.order().end());

  std::vector<int64_t> values(nest.vars().size(), 0);
  std::vector<T> loaded(def.inputs.size());
  auto& out = *buffers[0];
  std::vector<char> touched(out.size(), 0);
  std::vector<int64_t> bias_at(def.bias ? out.size() : 0, 0);
  const T init = init_value<T>(def.init);

  std::vector<int64_t> counter(loops.size(), 0);
  for (const auto v : loops)
    if (nest.var(v).extent <= 0) return;
  while (true) {
    for (size_t i = 0; i < loops.size(); ++i) values[loops[i].value] = counter[i];
    nest.evaluate_vars(values);
    if (nest.in_bounds(values)) {
      for (size_t i = 0; i < def.inputs.size(); ++i)
        loaded[i] = (*buffers[1 + i])[flat_index(accesses[1 + i], values)];
      const T v = eval_expr<T>(def.expr, loaded);
      const int64_t o = flat_index(accesses[0], values);
      if (!touched[o]) {
        touched[o] = 1;
        if (def.reduce != ReduceKind::none) out[o] = init;
        if (def.bias) bias_at[o] = flat_index(accesses[*nest.bias_access()], values);
      }
      switch (def.reduce) {
        case ReduceKind::none: out[o] = v; break;
        case ReduceKind::sum: out[o] = out[o] + v; break;
        case ReduceKind::max: out[o] = out[o] < v ? v : out[o]; break;
      }
    }
    // Odometer, innermost loop fastest.
    int level = static_cast<int>(loops.size()) - 1;
    while (level >= 0) {
      if (++counter[level] < nest.var(loops[level]).extent) break;
      counter[level] = 0;
      --level;
    }
    if (level < 0) break;
  }

  if (def.epilogue == Epilogue::none) return;
  const std::vector<T>* bias = def.bias ? buffers[*nest.bias_access()] : nullptr;
  for (size_t o = 0; o < out.size(); ++o) {
    if (!touched[o]) continue;
    T v = out[o];
    if (bias) v = v + (*bias)[bias_at[o]];
    out[o] = has_relu(def.epilogue) && v < T(0) ? T(0) : v;
  }
}

template float init_value<float>(double);
template int32_t init_value<int32_t>(double);
template float eval_expr<float>(const Expr&, std::span<const float>);
template int32_t eval_expr<int32_t>(const Expr&, std::span<const int32_t>);
template void interpret<float>(const LoopNest&, TensorMap<float>&);
template void interpret<int32_t>(const LoopNest&, TensorMap<int32_t>&);

}  // namespace swsched
