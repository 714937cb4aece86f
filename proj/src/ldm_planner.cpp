#include "swsched/ldm_planner.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "swsched/error.hpp"

namespace swsched {

void MachineConfig::validate() const {
  if (ldm_bytes <= 0 || num_pes <= 0 || init_chunk <= 0 || ldm_reserve < 0)
    throw Error("machine configuration values must be positive");
  if (ldm_reserve >= ldm_bytes) throw Error("scratchpad reserve leaves no room for tiles");
}

int64_t BufferPlan::at(VarId var) const {
  auto it = buffer.find(var);
  return it == buffer.end() ? 1 : it->second;
}

namespace {

class Planner {
 public:
  Planner(std::span<const PlanVar> vars, std::span<const TensorView> tensors,
          const MachineConfig& machine)
      : vars_(vars), tensors_(tensors), capacity_(machine.capacity()), chunk_(machine.init_chunk) {}

  BufferPlan run() {
    for (const auto& v : vars_) {
      plan_.buffer[v.id] = 1;
      bool correlated = false;
      for (const auto& t : tensors_) correlated = correlated || t.uses(v.id);
      if (correlated && v.extent > 1) universe_.insert(v.id);
    }
    plan_.capacity_bytes = capacity_;
    frontiers_ = initial_frontiers(universe_, tensors_);
    checkpoint(nullptr, "start");
    if (usage() > capacity_)
      throw InfeasibleError(fmt::format("minimal tiles need {} bytes but the scratchpad holds {}",
                                        usage(), capacity_));
    initialize();
    expand();
    plan_.frontiers = frontiers_;
    plan_.usage_bytes = usage();
    return std::move(plan_);
  }

 private:
  const PlanVar& info(VarId id) const {
    for (const auto& v : vars_)
      if (v.id == id) return v;
    throw Error("planner: unknown variable");
  }

  int64_t usage() const { return ldm_usage(tensors_, plan_.buffer); }
  int64_t& buf(VarId id) { return plan_.buffer[id]; }

  void checkpoint(const PlanVar* v, const char* decision, int64_t usage_bytes = -1) {
    plan_.trace.push_back(PlanCheckpoint{v ? v->name : "", v ? plan_.buffer[v->id] : 0,
                                         usage_bytes < 0 ? usage() : usage_bytes, decision});
  }

  void saturate(VarId id) {
    update(universe_, tensors_, frontiers_, id, Direction::up);
    checkpoint(&info(id), "saturate");
  }

  // Variables indexing only completed dimensions cannot grow any tile.
  void absorb() {
    bool again = true;
    while (again) {
      again = false;
      for (VarId id : universe_) {
        bool live = false;
        for (size_t t = 0; t < tensors_.size(); ++t)
          for (int d = frontiers_[t]; d < tensors_[t].rank(); ++d)
            live = live || tensors_[t].dim_uses(d, id);
        if (live) continue;
        spdlog::debug("planner: '{}' indexes only buffered dimensions; absorbed", info(id).name);
        update(universe_, tensors_, frontiers_, id, Direction::up);
        checkpoint(&info(id), "absorb");
        again = true;
        break;
      }
    }
  }

  // Sizevars by ascending marginal byte cost, then compvars by ascending
  // number of tensors touched; pinned and saturated variables excluded.
  std::vector<VarId> sorted_vars() {
    absorb();
    std::vector<VarId> candidates;
    for (const auto& v : vars_)
      if (universe_.count(v.id)) candidates.push_back(v.id);
    const VarClass cls = classify(candidates, tensors_, frontiers_);

    auto keep = [&](VarId id) { return !info(id).pinned && plan_.buffer[id] < info(id).extent; };
    std::vector<std::pair<int64_t, VarId>> sizes, comps;
    for (VarId id : cls.sizevars)
      if (keep(id)) sizes.emplace_back(marginal_cost(id), id);
    for (VarId id : cls.compvars) {
      if (!keep(id)) continue;
      int64_t n = 0;
      for (const auto& t : tensors_) n += t.uses(id) ? 1 : 0;
      comps.emplace_back(n, id);
    }
    auto by_key = [](const auto& a, const auto& b) { return a.first < b.first; };
    std::stable_sort(sizes.begin(), sizes.end(), by_key);
    std::stable_sort(comps.begin(), comps.end(), by_key);
    std::vector<VarId> out;
    for (const auto& [k, id] : sizes) out.push_back(id);
    for (const auto& [k, id] : comps) out.push_back(id);
    return out;
  }

  int64_t marginal_cost(VarId id) const {
    int64_t cost = 0;
    for (const auto& t : tensors_) {
      for (int d = 0; d < t.rank(); ++d) {
        const int64_t c = t.indices[d].coeff(id);
        if (c == 0) continue;
        int64_t others = c * t.elem_bytes;
        for (int e = 0; e < t.rank(); ++e)
          if (e != d) others *= buffered_extent(t.indices[e], plan_.buffer);
        cost += others;
      }
    }
    return cost;
  }

  void initialize() {
    std::vector<VarId> stack;  // initialization order, for backtracking
    std::set<VarId> done;
    while (true) {
      std::vector<VarId> pending;
      for (VarId id : sorted_vars())
        if (!done.count(id)) pending.push_back(id);
      if (pending.empty()) return;
      for (VarId id : pending) {
        const PlanVar& v = info(id);
        buf(id) = std::min(v.extent, chunk_);
        done.insert(id);
        stack.push_back(id);
        checkpoint(&v, "init");
        if (buf(id) == v.extent) saturate(id);
        shrink(stack);
      }
    }
  }

  void shrink(const std::vector<VarId>& stack) {
    int cur = static_cast<int>(stack.size()) - 1;
    while (usage() > capacity_) {
      if (cur < 0)
        throw InfeasibleError(fmt::format("no tiling fits {} bytes of scratchpad", capacity_));
      const VarId id = stack[cur];
      const PlanVar& v = info(id);
      if (buf(id) == v.extent && !universe_.count(id))
        update(universe_, tensors_, frontiers_, id, Direction::down);
      buf(id) /= 2;
      if (buf(id) == 0) {
        buf(id) = 1;
        checkpoint(&v, "bottom");
        --cur;
        continue;
      }
      checkpoint(&v, "shrink");
    }
  }

  void expand() {
    std::vector<VarId> order = sorted_vars();
    size_t cursor = 0;
    while (!order.empty()) {
      const VarId id = order[cursor % order.size()];
      const PlanVar& v = info(id);
      const int64_t old = buf(id);
      buf(id) = std::min(old * 2, v.extent);
      const int64_t grown = usage();
      if (grown > capacity_) {
        const int64_t tried = buf(id);
        buf(id) = old;
        plan_.trace.push_back(PlanCheckpoint{v.name, tried, grown, "reject"});
        return;
      }
      checkpoint(&v, "expand");
      if (buf(id) == v.extent) {
        saturate(id);
        order = sorted_vars();
        cursor = 0;
      } else {
        ++cursor;
      }
    }
    checkpoint(nullptr, "done");
  }

  std::span<const PlanVar> vars_;
  std::span<const TensorView> tensors_;
  int64_t capacity_;
  int64_t chunk_;
  VarSet universe_;
  Frontiers frontiers_;
  BufferPlan plan_;
};

}  // namespace

BufferPlan plan_ldm(std::span<const PlanVar> vars, std::span<const TensorView> tensors,
                    const MachineConfig& machine) {
  machine.validate();
  return Planner(vars, tensors, machine).run();
}

nlohmann::json trace_to_json(const BufferPlan& plan) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : plan.trace)
    out.push_back({{"var", c.var}, {"Buffer", c.buffer}, {"usage_bytes", c.usage_bytes},
                   {"decision", c.decision}});
  return out;
}

}  // namespace swsched
