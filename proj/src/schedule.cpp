#include "swsched/schedule.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "swsched/access_analysis.hpp"
#include "swsched/error.hpp"

namespace swsched {

std::span<const VarId> ScheduledNest::outer() const {
  return std::span<const VarId>(nest.order()).first(static_cast<size_t>(num_outer));
}

std::span<const VarId> ScheduledNest::inner() const {
  return std::span<const VarId>(nest.order()).subspan(static_cast<size_t>(num_outer));
}

bool ScheduledNest::is_buffered(int access) const {
  return std::find(buffered.begin(), buffered.end(), access) != buffered.end();
}

namespace {

std::vector<VarId> leaves_used(const LoopNest& nest, const TensorAccess& acc) {
  std::vector<VarId> out;
  for (const auto& idx : acc.indices)
    for (const auto& t : idx.terms)
      for (VarId l : nest.leaves_of(t.var))
        if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
  return out;
}

std::vector<std::string> split_dotted(const std::string& name) {
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    const size_t dot = name.find('.', start);
    parts.push_back(name.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return parts;
}

// Resolves a partition directive: a loop name, or dotted root names to fuse.
ParallelResult partition_named(const LoopNest& base, const std::string& name,
                               const MachineConfig& machine) {
  if (auto id = base.try_find(name)) return parallelize_on(base, *id, machine);
  const auto parts = split_dotted(name);
  if (parts.size() < 2) throw ScheduleError(fmt::format("no loop named '{}' to partition", name));
  LoopNest cur = base;
  VarId acc = cur.find(parts[0]);
  for (size_t i = 1; i < parts.size(); ++i) {
    const VarId next = cur.find(parts[i]);
    std::vector<VarId> order;
    for (VarId v : cur.order())
      if (v != next) {
        order.push_back(v);
        if (v == acc) order.push_back(next);
      }
    cur = reorder(cur, order);
    auto f = fuse(cur, acc, next);
    cur = std::move(f.nest);
    acc = f.fused;
  }
  return parallelize_on(cur, acc, machine);
}

}  // namespace

ScheduledNest schedule_nest(const ComputeDef& def, const MachineConfig& machine,
                            const ScheduleOverrides& overrides) {
  machine.validate();
  const LoopNest base(def);
  ParallelResult pr{base, std::nullopt, std::nullopt, std::nullopt};
  if (!overrides.parallel) {
    pr = parallelize(base, machine);
  } else if (*overrides.parallel != "none") {
    pr = partition_named(base, *overrides.parallel, machine);
  }

  ScheduledNest s(pr.nest);
  s.partition = pr.partition;
  s.num_pes = pr.partition ? machine.num_pes : 1;
  LoopNest& nest = s.nest;

  for (int a = 0; a < static_cast<int>(nest.accesses().size()); ++a)
    if (!overrides.unbuffered.count(nest.accesses()[a].tensor.name)) s.buffered.push_back(a);
  for (const auto& name : overrides.unbuffered)
    if (!std::any_of(nest.accesses().begin(), nest.accesses().end(),
                     [&](const TensorAccess& acc) { return acc.tensor.name == name; }))
      throw ScheduleError(fmt::format("'{}' is not accessed by '{}'", name, def.name));

  std::vector<TensorView> views;
  for (int a : s.buffered) views.push_back(TensorView::from_access(nest.accesses()[a], nest));

  const bool fused_partition = pr.partition && pr.partition->fused.size() > 1;
  for (VarId v : nest.order())
    s.plan_vars.push_back(PlanVar{v, nest.var(v).name, nest.var(v).extent,
                                  fused_partition && pr.local_var && *pr.local_var == v});

  if (overrides.buffer.empty()) {
    s.plan = plan_ldm(s.plan_vars, views, machine);
  } else {
    for (const auto& [name, b] : overrides.buffer) {
      auto it = std::find_if(s.plan_vars.begin(), s.plan_vars.end(),
                             [&](const PlanVar& p) { return p.name == name; });
      if (it == s.plan_vars.end())
        throw ScheduleError(fmt::format("buffer directive names unknown loop '{}'", name));
      if (b < 1 || b > it->extent)
        throw ScheduleError(fmt::format("buffer extent {} for '{}' outside [1, {}]", b, name, it->extent));
    }
    for (const auto& pv : s.plan_vars) {
      auto it = overrides.buffer.find(pv.name);
      s.plan.buffer[pv.id] = it == overrides.buffer.end() ? 1 : it->second;
    }
    s.plan.usage_bytes = ldm_usage(views, s.plan.buffer);
    s.plan.capacity_bytes = machine.capacity();
  }

  std::vector<VarId> inner;
  for (const auto& pv : s.plan_vars) {
    const int64_t b = s.plan.at(pv.id);
    // A pinned loop drives non-affine derived indices and must stay outer.
    if (pv.pinned) continue;
    if (b >= pv.extent) {
      inner.push_back(pv.id);
    } else if (b > 1) {
      auto sp = split(nest, pv.id, b);
      nest = std::move(sp.nest);
      inner.push_back(sp.inner);
    }
  }
  auto is_inner = [&](VarId v) { return std::find(inner.begin(), inner.end(), v) != inner.end(); };

  std::vector<VarId> outer;
  for (VarId v : nest.order())
    if (!is_inner(v)) outer.push_back(v);
  for (VarId v : outer)
    s.order_problem.outer.push_back(
        OrderVar{v, nest.var(v).name, nest.var(v).extent, nest.var(v).kind == VarKind::reduction});
  for (int a : s.buffered) {
    OrderTensor t{nest.accesses()[a].tensor.name, {}, a == LoopNest::output_access};
    for (VarId l : leaves_used(nest, nest.accesses()[a]))
      if (std::find(outer.begin(), outer.end(), l) != outer.end()) t.deps.insert(l);
    s.order_problem.tensors.push_back(std::move(t));
  }

  if (overrides.order.empty()) {
    s.order_report = reorder_loops(s.order_problem);
  } else {
    std::vector<VarId> order;
    for (const auto& name : overrides.order) {
      const auto id = nest.try_find(name);
      if (!id || std::find(outer.begin(), outer.end(), *id) == outer.end())
        throw ScheduleError(fmt::format("order directive names '{}', which is not an outer loop", name));
      order.push_back(*id);
    }
    auto sorted = order;
    auto expect = outer;
    std::sort(sorted.begin(), sorted.end());
    std::sort(expect.begin(), expect.end());
    if (sorted != expect) throw ScheduleError("order directive is not a permutation of the outer loops");
    s.order_report.result = order_cost(s.order_problem, order);
  }

  std::vector<VarId> final_order = s.order_report.result.order;
  for (VarId v : nest.order())
    if (is_inner(v)) final_order.push_back(v);
  nest = reorder(nest, final_order);
  s.num_outer = static_cast<int>(outer.size());

  for (int a : s.buffered) {
    const auto& acc = nest.accesses()[a];
    const auto same_name = std::count_if(nest.accesses().begin(), nest.accesses().end(),
                                         [&](const TensorAccess& o) { return o.tensor.name == acc.tensor.name; });
    if (same_name != 1) continue;
    std::vector<VarId> tile;
    for (VarId l : leaves_used(nest, acc))
      if (is_inner(l)) tile.push_back(l);
    if (tile.empty()) continue;
    nest = a == LoopNest::output_access ? buffer_write(nest, acc.tensor.name, tile)
                                        : buffer_read(nest, acc.tensor.name, tile);
  }

  s.dma = coalesce(nest, insert_dma(nest, s.num_outer, s.buffered));
  s.predicted_dma_execs = predict_dma_execs(nest, s.num_outer, s.dma, machine.num_pes);
  std::set<int> counted;
  for (const auto& d : s.dma) {
    if (!counted.insert(d.access).second) continue;
    int64_t elems = 1;
    for (int64_t span : d.spans) elems *= span;
    s.tile_bytes += elems * elem_bytes(nest.accesses()[d.access].tensor.elem);
  }
  return s;
}

ScheduleOverrides overrides_of(const ScheduledNest& s) {
  ScheduleOverrides o;
  for (const auto& pv : s.plan_vars) o.buffer[pv.name] = s.plan.at(pv.id);
  for (VarId v : s.outer()) o.order.push_back(s.nest.var(v).name);
  o.parallel = s.partition ? s.partition->var : std::string("none");
  for (int a = 0; a < static_cast<int>(s.nest.accesses().size()); ++a)
    if (!s.is_buffered(a)) o.unbuffered.insert(s.nest.accesses()[a].tensor.name);
  return o;
}

nlohmann::json to_json(const ScheduleOverrides& o) {
  nlohmann::json j = nlohmann::json::object();
  if (!o.buffer.empty()) {
    j["buffer"] = nlohmann::json::object();
    for (const auto& [k, v] : o.buffer) j["buffer"][k] = v;
  }
  if (!o.order.empty()) j["order"] = o.order;
  if (o.parallel) j["parallel"] = *o.parallel;
  if (!o.unbuffered.empty()) j["unbuffered"] = std::vector<std::string>(o.unbuffered.begin(), o.unbuffered.end());
  return j;
}

ScheduleOverrides overrides_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("schedule overrides must be an object");
  ScheduleOverrides o;
  for (const auto& [key, value] : j.items()) {
    if (key == "buffer") {
      if (!value.is_object()) throw ParseError("schedule 'buffer' must map loop names to extents");
      for (const auto& [name, b] : value.items()) {
        if (!b.is_number_integer()) throw ParseError(fmt::format("buffer extent for '{}' must be an integer", name));
        o.buffer[name] = b.get<int64_t>();
      }
    } else if (key == "order") {
      if (!value.is_array()) throw ParseError("schedule 'order' must be an array of loop names");
      for (const auto& n : value) {
        if (!n.is_string()) throw ParseError("schedule 'order' entries must be strings");
        o.order.push_back(n.get<std::string>());
      }
    } else if (key == "parallel") {
      if (!value.is_string()) throw ParseError("schedule 'parallel' must be a loop name or \"none\"");
      o.parallel = value.get<std::string>();
    } else if (key == "unbuffered") {
      if (!value.is_array()) throw ParseError("schedule 'unbuffered' must be an array of tensor names");
      for (const auto& n : value) {
        if (!n.is_string()) throw ParseError("schedule 'unbuffered' entries must be strings");
        o.unbuffered.insert(n.get<std::string>());
      }
    } else {
      throw ParseError(fmt::format("unknown schedule key '{}'", key));
    }
  }
  return o;
}

nlohmann::json to_json(const ScheduledNest& s) {
  const auto& nest = s.nest;
  nlohmann::json j;
  j["name"] = nest.def().name;
  if (s.partition) {
    const auto& p = *s.partition;
    j["partition"] = {{"var", p.var},       {"fused", p.fused},   {"extent", p.extent},
                      {"num_pes", p.num_pes}, {"chunk", p.chunk}, {"active_pes", p.active_pes()}};
  } else {
    j["partition"] = nullptr;
  }
  j["buffer"] = nlohmann::json::object();
  for (const auto& pv : s.plan_vars) j["buffer"][pv.name] = s.plan.at(pv.id);
  j["usage_bytes"] = s.plan.usage_bytes;
  j["capacity_bytes"] = s.plan.capacity_bytes;
  j["tile_bytes"] = s.tile_bytes;
  j["trace"] = trace_to_json(s.plan);
  std::vector<std::string> outer, inner;
  for (VarId v : s.outer()) outer.push_back(nest.var(v).name);
  for (VarId v : s.inner()) inner.push_back(nest.var(v).name);
  j["outer"] = outer;
  j["inner"] = inner;
  j["order_cost"] = to_json(s.order_problem, s.order_report);
  j["dma"] = nlohmann::json::array();
  for (const auto& d : s.dma) j["dma"].push_back(to_json(d));
  j["predicted_dma_execs"] = s.predicted_dma_execs;
  j["schedule"] = to_json(overrides_of(s));
  return j;
}

}  // namespace swsched
