#include "swsched/loop_orderer.hpp"

#include <algorithm>
#include <limits>

#include <spdlog/spdlog.h>

namespace swsched {

int insertion_level(const OrderTensor& tensor, std::span<const VarId> order) {
  int level = 0;
  for (size_t i = 0; i < order.size(); ++i)
    if (tensor.deps.count(order[i])) level = static_cast<int>(i) + 1;
  return level;
}

namespace {

const OrderVar& lookup(const OrderProblem& p, VarId id) {
  for (const auto& v : p.outer)
    if (v.id == id) return v;
  throw std::out_of_range("order variable not in problem");
}

}  // namespace

OrderCost order_cost(const OrderProblem& problem, std::span<const VarId> order) {
  OrderCost c;
  c.order.assign(order.begin(), order.end());
  // visits[L] = iterations of loops 1..L; reduction_by[L] = a reduction among them.
  std::vector<int64_t> visits(order.size() + 1, 1);
  std::vector<char> reduction_by(order.size() + 1, 0);
  for (size_t i = 0; i < order.size(); ++i) {
    const OrderVar& v = lookup(problem, order[i]);
    visits[i + 1] = visits[i] * v.extent;
    reduction_by[i + 1] = reduction_by[i] || v.reduction;
  }
  for (const auto& t : problem.tensors) {
    const int level = insertion_level(t, order);
    const int64_t per_visit = t.output && reduction_by[level] ? 2 : 1;
    c.levels.push_back(level);
    c.per_tensor.push_back(per_visit * visits[level]);
    c.total += c.per_tensor.back();
  }
  return c;
}

int64_t count_dma(const OrderProblem& problem, std::span<const VarId> prefix, VarId candidate,
                  bool* exhaustive) {
  std::vector<VarId> order(prefix.begin(), prefix.end());
  order.push_back(candidate);
  std::vector<VarId> rest;
  for (const auto& v : problem.outer)
    if (std::find(order.begin(), order.end(), v.id) == order.end()) rest.push_back(v.id);

  if (static_cast<int>(rest.size()) > kExhaustiveLimit) {
    if (exhaustive) *exhaustive = false;
    order.insert(order.end(), rest.begin(), rest.end());
    return order_cost(problem, order).total;
  }
  if (exhaustive) *exhaustive = true;
  std::sort(rest.begin(), rest.end());
  const size_t fixed = order.size();
  order.resize(fixed + rest.size());
  int64_t best = std::numeric_limits<int64_t>::max();
  do {
    std::copy(rest.begin(), rest.end(), order.begin() + static_cast<long>(fixed));
    best = std::min(best, order_cost(problem, order).total);
  } while (std::next_permutation(rest.begin(), rest.end()));
  return best;
}

OrderReport reorder_loops(const OrderProblem& problem) {
  OrderReport report;
  std::vector<VarId> free_vars;
  std::vector<VarId> remaining;
  for (const auto& v : problem.outer) {
    bool used = false;
    for (const auto& t : problem.tensors) used = used || t.deps.count(v.id);
    (used ? remaining : free_vars).push_back(v.id);
  }
  // A free loop only multiplies the visits of what it encloses, so it trails
  // every correlated loop; completions range over correlated loops only.
  OrderProblem sub = problem;
  sub.outer.clear();
  for (const auto& v : problem.outer)
    if (std::find(free_vars.begin(), free_vars.end(), v.id) == free_vars.end())
      sub.outer.push_back(v);
  std::vector<VarId> order;
  while (!remaining.empty()) {
    OrderStep step;
    int64_t best = std::numeric_limits<int64_t>::max();
    size_t best_at = 0;
    for (size_t i = 0; i < remaining.size(); ++i) {
      bool exhaustive = true;
      const int64_t cost = count_dma(sub, order, remaining[i], &exhaustive);
      report.exhaustive = report.exhaustive && exhaustive;
      step.candidates.emplace_back(remaining[i], cost);
      if (cost < best) {
        best = cost;
        best_at = i;
      }
    }
    step.chosen = remaining[best_at];
    order.push_back(step.chosen);
    remaining.erase(remaining.begin() + static_cast<long>(best_at));
    report.steps.push_back(std::move(step));
  }
  if (!report.exhaustive)
    spdlog::warn("loop order: more than {} undecided loops; completions estimated greedily",
                 kExhaustiveLimit);
  order.insert(order.end(), free_vars.begin(), free_vars.end());
  report.result = order_cost(problem, order);
  return report;
}

std::vector<OrderCost> enumerate_orders(const OrderProblem& problem) {
  std::vector<VarId> ids;
  for (const auto& v : problem.outer) ids.push_back(v.id);
  std::vector<size_t> perm(ids.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::vector<OrderCost> out;
  do {
    std::vector<VarId> order;
    for (size_t i : perm) order.push_back(ids[i]);
    out.push_back(order_cost(problem, order));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

nlohmann::json to_json(const OrderProblem& problem, const OrderReport& report) {
  auto name = [&](VarId id) { return lookup(problem, id).name; };
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : report.steps) {
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& [id, cost] : s.candidates) cands.push_back({{"var", name(id)}, {"cost", cost}});
    steps.push_back({{"candidates", cands}, {"chosen", name(s.chosen)}});
  }
  nlohmann::json order = nlohmann::json::array();
  for (VarId id : report.result.order) order.push_back(name(id));
  nlohmann::json tensors = nlohmann::json::array();
  for (size_t i = 0; i < problem.tensors.size(); ++i)
    tensors.push_back({{"tensor", problem.tensors[i].name},
                       {"level", report.result.levels[i]},
                       {"execs", report.result.per_tensor[i]}});
  return {{"steps", steps},
          {"order", order},
          {"tensors", tensors},
          {"total_dma_execs", report.result.total},
          {"exhaustive", report.exhaustive}};
}

}  // namespace swsched
