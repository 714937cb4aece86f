#include "swsched/program.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "swsched/error.hpp"

namespace swsched {

template <class T>
ProgramResult<T> simulate_program(const ProgramPlan& program, const TensorMap<T>& data,
                                  const SimOptions& options) {
  const MemoryPlan& mem = program.memory;
  std::vector<T> arena(static_cast<size_t>(mem.arena_bytes) / sizeof(T), T(0));
  auto region = [&](const Allocation& a) {
    return std::span<T>(arena.data() + a.offset / static_cast<int64_t>(sizeof(T)),
                        static_cast<size_t>(a.tensor.num_elems()));
  };
  for (const auto& a : mem.persistent) {
    if (a.role != TensorRole::input && a.role != TensorRole::param) continue;
    auto it = data.find(a.tensor.name);
    if (it == data.end()) continue;
    if (static_cast<int64_t>(it->second.size()) != a.tensor.num_elems())
      throw SimulationError(SimulationError::Kind::shape_mismatch,
                            fmt::format("'{}' has {} elements, expected {}", a.tensor.name, it->second.size(),
                                        a.tensor.num_elems()));
    std::copy(it->second.begin(), it->second.end(), region(a).begin());
  }

  ProgramResult<T> r;
  for (const auto& layer : program.layers) {
    SimStats layer_total;
    for (const auto& op : layer.ops) {
      std::vector<Binding<T>> bindings;
      for (const auto& acc : op.sched.nest.accesses()) bindings.push_back(region(mem.at(acc.tensor.name)));
      layer_total += simulate_nest<T>(op.sched, program.machine, std::span<const Binding<T>>(bindings), options);
    }
    const auto out = region(mem.at(layer.name));
    r.activations.emplace(layer.name, std::vector<T>(out.begin(), out.end()));
    r.layer_stats.emplace_back(layer.name, layer_total);
    r.total += layer_total;
  }
  return r;
}

template <class T>
double max_relative_error(std::span<const T> got, std::span<const T> want) {
  if (got.size() != want.size()) return std::numeric_limits<double>::infinity();
  double scale = 0;
  for (T w : want) scale = std::max(scale, std::abs(static_cast<double>(w)));
  const double floor = std::max(1e-3 * scale, std::numeric_limits<double>::min());
  double worst = 0;
  for (size_t i = 0; i < got.size(); ++i) {
    const double r = static_cast<double>(want[i]);
    worst = std::max(worst, std::abs(static_cast<double>(got[i]) - r) / std::max(std::abs(r), floor));
  }
  return worst;
}

template double max_relative_error<float>(std::span<const float>, std::span<const float>);
template double max_relative_error<int32_t>(std::span<const int32_t>, std::span<const int32_t>);

template ProgramResult<float> simulate_program<float>(const ProgramPlan&, const TensorMap<float>&,
                                                      const SimOptions&);
template ProgramResult<int32_t> simulate_program<int32_t>(const ProgramPlan&, const TensorMap<int32_t>&,
                                                          const SimOptions&);

}  // namespace swsched
