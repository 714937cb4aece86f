#pragma once

// Text front end for compute definitions: "C[x][y]" accesses with affine
// subscripts such as "I[rc][yy*2+ry][xx*2+rx]" and scalar expressions built
// from +, *, max(a, b), select(c, a, b), numbers and accesses.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "swsched/tensor_ir.hpp"

namespace swsched {

struct ComputeText {
  std::string name;
  std::vector<IterVar> vars;  // root variables in program order
  std::string output;
  std::string expr;
  ReduceKind reduce = ReduceKind::none;
  double init = 0.0;
  Epilogue epilogue = Epilogue::none;
  std::string bias;  // access text, required for bias_relu
};

AffineIndex parse_index(std::string_view text, std::span<const IterVar> vars);
TensorAccess parse_access(std::string_view text, const TensorRegistry& tensors,
                          std::span<const IterVar> vars);
/// Parses the expression, appending each distinct access to `inputs`.
Expr parse_expr(std::string_view text, const TensorRegistry& tensors,
                std::span<const IterVar> vars, std::vector<TensorAccess>& inputs);
ComputeDef parse_compute(const ComputeText& text, const TensorRegistry& tensors);

}  // namespace swsched
