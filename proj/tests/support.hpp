#pragma once

// Shared builders for the test binaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "swsched/access_analysis.hpp"
#include "swsched/ldm_planner.hpp"
#include "swsched/ops.hpp"
#include "swsched/program.hpp"
#include "swsched/tensor_ir.hpp"

namespace swtest {

using namespace swsched;

inline TensorDecl tensor(std::string name, std::vector<int64_t> outer_first,
                         ElemKind elem = ElemKind::f32) {
  return TensorDecl{std::move(name), {outer_first.rbegin(), outer_first.rend()}, elem};
}

/// C[x][y] = sum_k A[x][k] B[k][y]
inline ComputeDef matmul(int64_t nx, int64_t ny, int64_t nk, ElemKind elem = ElemKind::f32) {
  return ops::matmul("matmul", tensor("C", {nx, ny}, elem), tensor("A", {nx, nk}, elem),
                     tensor("B", {nk, ny}, elem));
}

/// The strided convolution shape used throughout: I[16][33][33], W[32][16][3][3].
inline ComputeDef conv_fig3(ElemKind elem = ElemKind::f32) {
  return ops::conv2d("conv", tensor("out", {32, 16, 16}, elem), tensor("I", {16, 33, 33}, elem),
                     tensor("W", {32, 16, 3, 3}, elem), 2, std::nullopt, Epilogue::none);
}

inline ComputeDef vec(int64_t n, ElemKind elem = ElemKind::f32) {
  return ops::vector_mul("vec", tensor("v", {n}, elem), tensor("v1", {n}, elem),
                         tensor("v2", {n}, elem));
}

inline std::vector<TensorView> views(const LoopNest& nest) {
  std::vector<TensorView> out;
  for (const auto& a : nest.accesses()) out.push_back(TensorView::from_access(a, nest));
  return out;
}

inline std::vector<PlanVar> plan_vars(const LoopNest& nest) {
  std::vector<PlanVar> out;
  for (VarId v : nest.order()) out.push_back(PlanVar{v, nest.var(v).name, nest.var(v).extent, false});
  return out;
}

template <class T>
std::vector<T> random_data(size_t n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<T> out(n);
  if constexpr (std::is_floating_point_v<T>) {
    std::uniform_real_distribution<T> dist(-1, 1);
    for (auto& v : out) v = dist(rng);
  } else {
    std::uniform_int_distribution<int> dist(-4, 4);
    for (auto& v : out) v = static_cast<T>(dist(rng));
  }
  return out;
}

template <class T>
double max_rel_error(const std::vector<T>& got, const std::vector<T>& want) {
  return max_relative_error<T>(std::span<const T>(got), std::span<const T>(want));
}

/// Random data for every input (and bias) of `def`.
template <class T>
TensorMap<T> random_inputs(const ComputeDef& def, uint64_t seed) {
  TensorMap<T> data;
  auto add = [&](const TensorAccess& a) {
    if (!data.count(a.tensor.name)) data[a.tensor.name] = random_data<T>(a.tensor.num_elems(), seed++);
  };
  for (const auto& in : def.inputs) add(in);
  if (def.bias) add(*def.bias);
  return data;
}

/// Output of the unscheduled definition.
template <class T>
std::vector<T> reference_output(const ComputeDef& def, TensorMap<T> data) {
  interpret<T>(LoopNest(def), data);
  return data.at(def.output.tensor.name);
}

}  // namespace swtest
