#pragma once

// Outer-loop ordering by minimal DMA executions.
//
// Cost model, per processing element: a tensor's transfer sits at its
// insertion level L, the position of the last outer loop it depends on
// (0 = before every loop), and executes once per iteration of loops 1..L.
// An output enclosed by a reduction loop costs a get and a put per visit.

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "swsched/tensor_ir.hpp"

namespace swsched {

struct OrderVar {
  VarId id;
  std::string name;
  int64_t extent = 1;
  bool reduction = false;
};

struct OrderTensor {
  std::string name;
  std::set<VarId> deps;  // outer loops the tile position depends on
  bool output = false;
};

struct OrderProblem {
  std::vector<OrderVar> outer;  // original program order
  std::vector<OrderTensor> tensors;
};

struct OrderCost {
  std::vector<VarId> order;
  std::vector<int> levels;
  std::vector<int64_t> per_tensor;
  int64_t total = 0;
};

/// Number of undecided loops beyond which completions are estimated greedily.
inline constexpr int kExhaustiveLimit = 8;

int insertion_level(const OrderTensor& tensor, std::span<const VarId> order);
OrderCost order_cost(const OrderProblem& problem, std::span<const VarId> order);

/// Minimum full-order cost over every completion of prefix + candidate.
/// `exhaustive` reports whether completions were enumerated.
int64_t count_dma(const OrderProblem& problem, std::span<const VarId> prefix, VarId candidate,
                  bool* exhaustive = nullptr);

struct OrderStep {
  std::vector<std::pair<VarId, int64_t>> candidates;
  VarId chosen;
};

struct OrderReport {
  std::vector<OrderStep> steps;
  OrderCost result;
  bool exhaustive = true;
};

/// Greedy choice of minimal count_dma, ties to original order. Loops that no
/// tensor depends on go last.
OrderReport reorder_loops(const OrderProblem& problem);

/// Every permutation's cost, in lexicographic order of original positions.
std::vector<OrderCost> enumerate_orders(const OrderProblem& problem);

nlohmann::json to_json(const OrderProblem& problem, const OrderReport& report);

}  // namespace swsched
