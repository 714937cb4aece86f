#pragma once

// Compute definitions of the supported operators. Shapes in the comments are
// written outermost first.

#include <cstdint>
#include <optional>
#include <string>

#include "swsched/tensor_ir.hpp"

namespace swsched::ops {

/// C[x][y] = sum_k A[x][k] * B[k][y]
ComputeDef matmul(const std::string& name, const TensorDecl& c, const TensorDecl& a,
                  const TensorDecl& b);

/// out[o] = sum_i in[i] * w[o][i], then the epilogue. A bias requires a
/// bias epilogue and vice versa.
ComputeDef dense(const std::string& name, const TensorDecl& out, const TensorDecl& in,
                 const TensorDecl& weight, const std::optional<TensorDecl>& bias,
                 Epilogue epilogue);

/// out[ff][yy][xx] = sum_{rc,ry,rx} in[rc][yy*s+ry][xx*s+rx] * w[ff][rc][ry][rx]
ComputeDef conv2d(const std::string& name, const TensorDecl& out, const TensorDecl& in,
                  const TensorDecl& weight, int64_t stride, const std::optional<TensorDecl>& bias,
                  Epilogue epilogue);

/// out[c][y][x] = max_{ry,rx} in[c][y*s+ry][x*s+rx]
ComputeDef maxpool(const std::string& name, const TensorDecl& out, const TensorDecl& in,
                   int64_t kernel, int64_t stride);

/// out[c*H*W + y*W + x] = in[c][y][x] for any rank; a partitioned copy.
ComputeDef flatten(const std::string& name, const TensorDecl& out, const TensorDecl& in);

/// Elementwise over equal shapes.
ComputeDef relu(const std::string& name, const TensorDecl& out, const TensorDecl& in);
ComputeDef add(const std::string& name, const TensorDecl& out, const TensorDecl& a,
               const TensorDecl& b);
ComputeDef copy(const std::string& name, const TensorDecl& out, const TensorDecl& in);

/// out[...] = value
ComputeDef fill(const std::string& name, const TensorDecl& out, double value);

/// out[c][y+pad][x+pad] = in[c][y][x]; the border is left untouched.
ComputeDef pad_interior(const std::string& name, const TensorDecl& out, const TensorDecl& in,
                        int64_t pad);

/// out[i] = v1[i] * v2[i]
ComputeDef vector_mul(const std::string& name, const TensorDecl& out, const TensorDecl& v1,
                      const TensorDecl& v2);

}  // namespace swsched::ops
