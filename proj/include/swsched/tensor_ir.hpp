#pragma once

// Tensor declarations, affine accesses, compute definitions and the loop-nest
// schedule primitives every later pass works on.
//
// Layout convention: dimension 0 of a tensor is the innermost (contiguous)
// dimension. Bracketed text such as A[x][k] lists dimensions outermost first,
// so k indexes dimension 0 of A.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace swsched {

enum class ElemKind { f32, i32 };

int elem_bytes(ElemKind kind);
std::string_view to_string(ElemKind kind);
ElemKind parse_elem_kind(std::string_view text);

struct TensorDecl {
  std::string name;
  std::vector<int64_t> shape;  // shape[0] is the innermost dimension
  ElemKind elem = ElemKind::f32;

  int rank() const { return static_cast<int>(shape.size()); }
  int64_t num_elems() const;
  int64_t bytes() const { return num_elems() * elem_bytes(elem); }
  /// Distance in elements between consecutive indices of `dim`.
  int64_t pitch(int dim) const;

  friend bool operator==(const TensorDecl&, const TensorDecl&) = default;
};

/// Registry of the tensors of one compilation unit; names are unique.
class TensorRegistry {
 public:
  const TensorDecl& declare_tensor(std::string name, std::vector<int64_t> shape,
                                   ElemKind elem = ElemKind::f32);
  const TensorDecl* find(std::string_view name) const;
  const TensorDecl& at(std::string_view name) const;
  const std::vector<TensorDecl>& all() const { return tensors_; }

 private:
  std::vector<TensorDecl> tensors_;
};

struct VarId {
  int value = -1;

  bool valid() const { return value >= 0; }
  friend auto operator<=>(VarId, VarId) = default;
};

enum class VarKind { spatial, reduction };
enum class VarOrigin { root, split_outer, split_inner, fused };

struct IterVar {
  std::string name;
  int64_t extent = 1;
  VarKind kind = VarKind::spatial;
  VarOrigin origin = VarOrigin::root;
  std::vector<VarId> parents;
};

struct AffineTerm {
  VarId var;
  int64_t coeff = 1;

  friend bool operator==(const AffineTerm&, const AffineTerm&) = default;
};

/// Sum of non-negative integer multiples of loop variables plus a constant.
struct AffineIndex {
  std::vector<AffineTerm> terms;
  int64_t constant = 0;

  static AffineIndex of(VarId var, int64_t coeff = 1);
  static AffineIndex constant_index(int64_t value);

  int64_t coeff(VarId var) const;
  bool uses(VarId var) const { return coeff(var) != 0; }
  /// Adds coeff*var, merging with an existing term. Zero terms are dropped.
  AffineIndex& add(VarId var, int64_t coeff);
  /// Replaces `var` by `replacement` (scaled by var's coefficient).
  AffineIndex substitute(VarId var, const AffineIndex& replacement) const;

  /// Evaluates the index; `value_of(VarId)` supplies each variable's value.
  template <class ValueOf>
  int64_t evaluate(ValueOf&& value_of) const {
    int64_t acc = constant;
    for (const auto& t : terms) acc += t.coeff * value_of(t.var);
    return acc;
  }

  friend bool operator==(const AffineIndex&, const AffineIndex&) = default;
};

enum class AccessMode { read, write, read_write };

struct TensorAccess {
  TensorDecl tensor;
  std::vector<AffineIndex> indices;  // one per dimension, indices[0] = dimension 0
  AccessMode mode = AccessMode::read;
};

/// Scalar expression over the input accesses of a compute definition.
struct Expr {
  enum class Op { load, constant, add, mul, max, select };

  Op op = Op::constant;
  int input = -1;      // load: index into ComputeDef::inputs
  double value = 0.0;  // constant
  std::vector<Expr> args;

  static Expr load(int input);
  static Expr constant(double value);
  static Expr add(Expr a, Expr b);
  static Expr mul(Expr a, Expr b);
  static Expr max(Expr a, Expr b);
  /// cond > 0 ? a : b
  static Expr select(Expr cond, Expr a, Expr b);
};

enum class ReduceKind { none, sum, max };
enum class Epilogue { none, relu, bias, bias_relu };

inline bool has_bias(Epilogue e) { return e == Epilogue::bias || e == Epilogue::bias_relu; }
inline bool has_relu(Epilogue e) { return e == Epilogue::relu || e == Epilogue::bias_relu; }

std::string_view to_string(ReduceKind kind);
std::string_view to_string(Epilogue kind);

/// out[...] (op)= expr(inputs...) over the root variables `vars`.
///
/// With a reduction the output is first set to `init`; every variable of
/// kind `reduction` is a reduce variable and must not index the output.
/// The epilogue runs once per output element after the reduction finishes;
/// bias and bias_relu read `bias` at the output's coordinates.
struct ComputeDef {
  std::string name;
  std::vector<IterVar> vars;
  TensorAccess output;
  std::vector<TensorAccess> inputs;
  Expr expr;
  ReduceKind reduce = ReduceKind::none;
  double init = 0.0;
  Epilogue epilogue = Epilogue::none;
  std::optional<TensorAccess> bias;

  /// Checks every structural invariant; throws IrError.
  void validate() const;
  VarId find_var(std::string_view name) const;
};

struct SplitRel {
  VarId parent, outer, inner;
  int64_t factor = 1;
  bool guarded = false;  // factor does not divide the parent's extent
};

struct FuseRel {
  VarId outer, inner, fused;
};

using VarRelation = std::variant<SplitRel, FuseRel>;

/// An ordered loop tree over a compute body. Immutable: primitives below
/// return new nests.
///
/// accesses()[0] is the output, [1, 1+inputs) the inputs and the optional
/// trailing access the epilogue bias. Split rewrites indices affinely in
/// terms of the new variables; fuse keeps the fused parents in the indices
/// as derived variables (parent = fused / inner.extent, fused % inner.extent).
class LoopNest {
 public:
  explicit LoopNest(ComputeDef def);

  const ComputeDef& def() const { return def_; }
  const std::vector<IterVar>& vars() const { return vars_; }
  const IterVar& var(VarId id) const;
  VarId find(std::string_view name) const;
  std::optional<VarId> try_find(std::string_view name) const;
  const std::vector<VarId>& order() const { return order_; }
  const std::vector<TensorAccess>& accesses() const { return accesses_; }
  const std::vector<VarRelation>& relations() const { return relations_; }

  int num_inputs() const { return static_cast<int>(def_.inputs.size()); }
  static constexpr int output_access = 0;
  int input_access(int i) const { return 1 + i; }
  std::optional<int> bias_access() const;

  std::optional<VarId> parallel_var() const { return parallel_; }
  /// Access index -> loop variables it is buffered along.
  const std::map<int, std::vector<VarId>>& buffered() const { return buffered_; }
  int access_index(std::string_view tensor) const;

  bool is_leaf(VarId id) const;
  bool is_live(VarId id) const;  // leaf in the order or the parallel var
  /// Leaf variables whose values determine `id`.
  std::vector<VarId> leaves_of(VarId id) const;
  const SplitRel* split_producing(VarId child) const;
  const SplitRel* split_of(VarId parent) const;
  const FuseRel* fuse_producing(VarId fused) const;
  const FuseRel* fuse_of(VarId parent) const;

  /// Given leaf values in `values` (indexed by VarId), fills in every
  /// non-leaf variable's value.
  void evaluate_vars(std::span<int64_t> values) const;
  /// False when a guarded split reconstructs an out-of-range parent value.
  bool in_bounds(std::span<const int64_t> values) const;

 private:
  friend struct NestEditor;

  ComputeDef def_;
  std::vector<IterVar> vars_;
  std::vector<VarId> order_;
  std::vector<TensorAccess> accesses_;
  std::vector<VarRelation> relations_;
  std::optional<VarId> parallel_;
  std::map<int, std::vector<VarId>> buffered_;
};

struct SplitResult {
  LoopNest nest;
  VarId outer, inner;
};

struct FuseResult {
  LoopNest nest;
  VarId fused;
};

/// Replaces `var` by (outer, inner) with inner.extent = factor and
/// outer.extent = ceil(extent / factor). Default names append "o" / "i".
SplitResult split(const LoopNest& nest, VarId var, int64_t factor,
                  std::string outer_name = {}, std::string inner_name = {});
/// Fuses v1 with v2, which v1 must immediately enclose.
FuseResult fuse(const LoopNest& nest, VarId v1, VarId v2);
/// `order` must be a permutation of the nest's loop variables.
LoopNest reorder(const LoopNest& nest, std::span<const VarId> order);
LoopNest buffer_read(const LoopNest& nest, std::string_view tensor, std::span<const VarId> vars);
LoopNest buffer_write(const LoopNest& nest, std::string_view tensor, std::span<const VarId> vars);
/// Binds a spatial leaf to the processing-element id; it leaves the loop order.
LoopNest bind_parallel(const LoopNest& nest, VarId var);

/// Dimensions of `access` whose index uses any of `vars` (or their leaves).
std::vector<int> dims_indexed_by(const LoopNest& nest, const TensorAccess& access,
                                 std::span<const VarId> vars);

template <class T>
using TensorMap = std::map<std::string, std::vector<T>, std::less<>>;

/// Converts a definition's init constant to T (-inf maps to lowest() for ints).
template <class T>
T init_value(double value);

/// Evaluates a scalar expression with `loaded[i]` the value of input i.
template <class T>
T eval_expr(const Expr& e, std::span<const T> loaded);

/// Naive execution of the nest exactly as ordered, including the parallel
/// variable, guards and epilogue. Tensors absent from `data` are created
/// zero-filled.
template <class T>
void interpret(const LoopNest& nest, TensorMap<T>& data);

}  // namespace swsched
