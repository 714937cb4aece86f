#include "swsched/ops.hpp"

#include <limits>

#include <fmt/format.h>

#include "swsched/error.hpp"

namespace swsched::ops {
namespace {

VarId add_var(ComputeDef& def, std::string name, int64_t extent, VarKind kind = VarKind::spatial) {
  def.vars.push_back(IterVar{std::move(name), extent, kind, VarOrigin::root, {}});
  return VarId{static_cast<int>(def.vars.size() - 1)};
}

// Indices listed outermost first, as in bracket notation.
TensorAccess access(const TensorDecl& t, std::vector<AffineIndex> outer_first,
                    AccessMode mode = AccessMode::read) {
  if (static_cast<int>(outer_first.size()) != t.rank())
    throw IrError(fmt::format("'{}' has rank {} but {} subscripts", t.name, t.rank(), outer_first.size()));
  return TensorAccess{t, {outer_first.rbegin(), outer_first.rend()}, mode};
}

AffineIndex idx(VarId v, int64_t coeff = 1) { return AffineIndex::of(v, coeff); }

AffineIndex idx2(VarId a, int64_t ca, VarId b) {
  AffineIndex i = AffineIndex::of(a, ca);
  i.add(b, 1);
  return i;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw IrError(what);
}

std::vector<std::string> axis_names(int rank) {
  switch (rank) {
    case 1: return {"i"};
    case 2: return {"y", "x"};
    case 3: return {"c", "y", "x"};
    case 4: return {"n", "c", "y", "x"};
    default: {
      std::vector<std::string> out;
      for (int d = 0; d < rank; ++d) out.push_back(fmt::format("i{}", d));
      return out;
    }
  }
}

// One spatial var per dimension of `t`; returns the indices outermost first.
std::vector<AffineIndex> elementwise_vars(ComputeDef& def, const TensorDecl& t) {
  const auto names = axis_names(t.rank());
  std::vector<AffineIndex> out;
  for (int k = 0; k < t.rank(); ++k) out.push_back(idx(add_var(def, names[k], t.shape[t.rank() - 1 - k])));
  return out;
}

}  // namespace

ComputeDef matmul(const std::string& name, const TensorDecl& c, const TensorDecl& a,
                  const TensorDecl& b) {
  require(a.rank() == 2 && b.rank() == 2 && c.rank() == 2, "matmul operands must be 2-D");
  const int64_t nx = a.shape[1], nk = a.shape[0], ny = b.shape[0];
  require(b.shape[1] == nk && c.shape[1] == nx && c.shape[0] == ny,
          fmt::format("{}: matmul shapes disagree", name));
  ComputeDef def;
  def.name = name;
  const VarId x = add_var(def, "x", nx);
  const VarId y = add_var(def, "y", ny);
  const VarId k = add_var(def, "k", nk, VarKind::reduction);
  def.output = access(c, {idx(x), idx(y)}, AccessMode::write);
  def.inputs = {access(a, {idx(x), idx(k)}), access(b, {idx(k), idx(y)})};
  def.expr = Expr::mul(Expr::load(0), Expr::load(1));
  def.reduce = ReduceKind::sum;
  def.validate();
  return def;
}

ComputeDef dense(const std::string& name, const TensorDecl& out, const TensorDecl& in,
                 const TensorDecl& weight, const std::optional<TensorDecl>& bias,
                 Epilogue epilogue) {
  require(weight.rank() == 2 && out.rank() == 1, fmt::format("{}: dense needs 2-D weights", name));
  const int64_t no = weight.shape[1], ni = weight.shape[0];
  require(in.num_elems() == ni && out.shape[0] == no, fmt::format("{}: dense shapes disagree", name));
  require(in.rank() == 1, fmt::format("{}: dense input must be flattened", name));
  ComputeDef def;
  def.name = name;
  const VarId o = add_var(def, "o", no);
  const VarId i = add_var(def, "i", ni, VarKind::reduction);
  def.output = access(out, {idx(o)}, AccessMode::write);
  def.inputs = {access(in, {idx(i)}), access(weight, {idx(o), idx(i)})};
  def.expr = Expr::mul(Expr::load(0), Expr::load(1));
  def.reduce = ReduceKind::sum;
  if (bias) {
    require(bias->rank() == 1 && bias->shape[0] == no, fmt::format("{}: bias shape", name));
    def.bias = access(*bias, {idx(o)});
  }
  def.epilogue = epilogue;
  def.validate();
  return def;
}

ComputeDef conv2d(const std::string& name, const TensorDecl& out, const TensorDecl& in,
                  const TensorDecl& weight, int64_t stride, const std::optional<TensorDecl>& bias,
                  Epilogue epilogue) {
  require(out.rank() == 3 && in.rank() == 3 && weight.rank() == 4,
          fmt::format("{}: conv2d expects CHW tensors and FCHW weights", name));
  require(stride >= 1, fmt::format("{}: stride must be positive", name));
  const int64_t nf = weight.shape[3], nc = weight.shape[2], kh = weight.shape[1], kw = weight.shape[0];
  const int64_t oh = out.shape[1], ow = out.shape[0];
  require(out.shape[2] == nf && in.shape[2] == nc, fmt::format("{}: conv2d channel mismatch", name));
  ComputeDef def;
  def.name = name;
  const VarId ff = add_var(def, "ff", nf);
  const VarId yy = add_var(def, "yy", oh);
  const VarId xx = add_var(def, "xx", ow);
  const VarId rc = add_var(def, "rc", nc, VarKind::reduction);
  const VarId ry = add_var(def, "ry", kh, VarKind::reduction);
  const VarId rx = add_var(def, "rx", kw, VarKind::reduction);
  def.output = access(out, {idx(ff), idx(yy), idx(xx)}, AccessMode::write);
  def.inputs = {access(in, {idx(rc), idx2(yy, stride, ry), idx2(xx, stride, rx)}),
                access(weight, {idx(ff), idx(rc), idx(ry), idx(rx)})};
  def.expr = Expr::mul(Expr::load(0), Expr::load(1));
  def.reduce = ReduceKind::sum;
  def.epilogue = epilogue;
  if (bias) {
    require(bias->rank() == 1 && bias->shape[0] == nf, fmt::format("{}: bias shape", name));
    def.bias = access(*bias, {idx(ff)});
  }
  def.validate();
  return def;
}

ComputeDef maxpool(const std::string& name, const TensorDecl& out, const TensorDecl& in,
                   int64_t kernel, int64_t stride) {
  require(out.rank() == 3 && in.rank() == 3 && out.shape[2] == in.shape[2],
          fmt::format("{}: maxpool expects matching CHW tensors", name));
  ComputeDef def;
  def.name = name;
  const VarId c = add_var(def, "c", out.shape[2]);
  const VarId y = add_var(def, "y", out.shape[1]);
  const VarId x = add_var(def, "x", out.shape[0]);
  const VarId ry = add_var(def, "ry", kernel, VarKind::reduction);
  const VarId rx = add_var(def, "rx", kernel, VarKind::reduction);
  def.output = access(out, {idx(c), idx(y), idx(x)}, AccessMode::write);
  def.inputs = {access(in, {idx(c), idx2(y, stride, ry), idx2(x, stride, rx)})};
  def.expr = Expr::load(0);
  def.reduce = ReduceKind::max;
  def.init = -std::numeric_limits<double>::infinity();
  def.validate();
  return def;
}

ComputeDef flatten(const std::string& name, const TensorDecl& out, const TensorDecl& in) {
  require(out.rank() == 1 && out.num_elems() == in.num_elems(),
          fmt::format("{}: flatten output must be 1-D with the same element count", name));
  ComputeDef def;
  def.name = name;
  const auto in_idx = elementwise_vars(def, in);
  AffineIndex flat;
  for (int k = 0; k < in.rank(); ++k) flat.add(in_idx[k].terms[0].var, in.pitch(in.rank() - 1 - k));
  def.output = access(out, {flat}, AccessMode::write);
  def.inputs = {access(in, in_idx)};
  def.expr = Expr::load(0);
  def.validate();
  return def;
}

ComputeDef relu(const std::string& name, const TensorDecl& out, const TensorDecl& in) {
  require(out.shape == in.shape, fmt::format("{}: relu shapes disagree", name));
  ComputeDef def;
  def.name = name;
  const auto i = elementwise_vars(def, out);
  def.output = access(out, i, AccessMode::write);
  def.inputs = {access(in, i)};
  def.expr = Expr::max(Expr::load(0), Expr::constant(0.0));
  def.validate();
  return def;
}

ComputeDef add(const std::string& name, const TensorDecl& out, const TensorDecl& a,
               const TensorDecl& b) {
  require(out.shape == a.shape && out.shape == b.shape, fmt::format("{}: add shapes disagree", name));
  ComputeDef def;
  def.name = name;
  const auto i = elementwise_vars(def, out);
  def.output = access(out, i, AccessMode::write);
  def.inputs = {access(a, i), access(b, i)};
  def.expr = Expr::add(Expr::load(0), Expr::load(1));
  def.validate();
  return def;
}

ComputeDef copy(const std::string& name, const TensorDecl& out, const TensorDecl& in) {
  require(out.shape == in.shape, fmt::format("{}: copy shapes disagree", name));
  ComputeDef def;
  def.name = name;
  const auto i = elementwise_vars(def, out);
  def.output = access(out, i, AccessMode::write);
  def.inputs = {access(in, i)};
  def.expr = Expr::load(0);
  def.validate();
  return def;
}

ComputeDef fill(const std::string& name, const TensorDecl& out, double value) {
  ComputeDef def;
  def.name = name;
  const auto i = elementwise_vars(def, out);
  def.output = access(out, i, AccessMode::write);
  def.expr = Expr::constant(value);
  def.validate();
  return def;
}

ComputeDef pad_interior(const std::string& name, const TensorDecl& out, const TensorDecl& in,
                        int64_t pad) {
  require(in.rank() == 3 && out.rank() == 3 && out.shape[2] == in.shape[2] &&
              out.shape[1] == in.shape[1] + 2 * pad && out.shape[0] == in.shape[0] + 2 * pad,
          fmt::format("{}: padded shape must grow each spatial side by {}", name, pad));
  ComputeDef def;
  def.name = name;
  const auto i = elementwise_vars(def, in);
  std::vector<AffineIndex> o = i;
  o[1].constant = pad;
  o[2].constant = pad;
  def.output = access(out, o, AccessMode::write);
  def.inputs = {access(in, i)};
  def.expr = Expr::load(0);
  def.validate();
  return def;
}

ComputeDef vector_mul(const std::string& name, const TensorDecl& out, const TensorDecl& v1,
                      const TensorDecl& v2) {
  require(out.rank() == 1 && v1.shape == out.shape && v2.shape == out.shape,
          fmt::format("{}: vector shapes disagree", name));
  ComputeDef def;
  def.name = name;
  const VarId i = add_var(def, "i", out.shape[0]);
  def.output = access(out, {idx(i)}, AccessMode::write);
  def.inputs = {access(v1, {idx(i)}), access(v2, {idx(i)})};
  def.expr = Expr::mul(Expr::load(0), Expr::load(1));
  def.validate();
  return def;
}

}  // namespace swsched::ops
