#include "swsched/simulator.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "swsched/dma_inserter.hpp"
#include "swsched/error.hpp"

namespace swsched {

SimStats& SimStats::operator+=(const SimStats& o) {
  dma_get_count += o.dma_get_count;
  dma_put_count += o.dma_put_count;
  dma_bytes += o.dma_bytes;
  dma_strided_ops += o.dma_strided_ops;
  scalar_mem_ops += o.scalar_mem_ops;
  ldm_high_water = std::max(ldm_high_water, o.ldm_high_water);
  steps += o.steps;
  return *this;
}

nlohmann::json to_json(const SimStats& s) {
  return {{"dma_get_count", s.dma_get_count},     {"dma_put_count", s.dma_put_count},
          {"dma_execs", s.dma_execs()},           {"dma_bytes", s.dma_bytes},
          {"dma_strided_ops", s.dma_strided_ops}, {"scalar_mem_ops", s.scalar_mem_ops},
          {"ldm_high_water", s.ldm_high_water},   {"steps", s.steps}};
}

namespace {

using Kind = SimulationError::Kind;

bool is_mul_of_two_loads(const Expr& e) {
  return e.op == Expr::Op::mul && e.args[0].op == Expr::Op::load && e.args[0].input == 0 &&
         e.args[1].op == Expr::Op::load && e.args[1].input == 1;
}

template <class T>
class NestRunner {
 public:
  NestRunner(const ScheduledNest& s, const MachineConfig& machine, std::span<const Binding<T>> bindings)
      : s_(s), nest_(s.nest), bindings_(bindings) {
    const auto& accesses = nest_.accesses();
    if (bindings.size() != accesses.size())
      throw SimulationError(Kind::shape_mismatch,
                            fmt::format("'{}': {} bindings for {} accesses", nest_.def().name,
                                        bindings.size(), accesses.size()));
    for (size_t a = 0; a < accesses.size(); ++a)
      if (static_cast<int64_t>(bindings[a].size()) != accesses[a].tensor.num_elems())
        throw SimulationError(Kind::shape_mismatch,
                              fmt::format("'{}': tensor '{}' bound to {} elements, expected {}",
                                          nest_.def().name, accesses[a].tensor.name,
                                          bindings[a].size(), accesses[a].tensor.num_elems()));

    // Static tile allocation, one region per transferred access.
    tile_.assign(accesses.size(), Region{});
    int64_t bytes = 0;
    for (const auto& d : s.dma) {
      Region& r = tile_[d.access];
      if (r.capacity > 0) continue;
      r.offset = scratch_elems_;
      r.capacity = std::accumulate(d.spans.begin(), d.spans.end(), int64_t{1}, std::multiplies<>());
      scratch_elems_ += r.capacity;
      bytes += r.capacity * elem_bytes(accesses[d.access].tensor.elem);
    }
    if (bytes > machine.capacity())
      throw SimulationError(Kind::scratchpad_overflow,
                            fmt::format("'{}': tiles need {} bytes of scratchpad, {} available",
                                        nest_.def().name, bytes, machine.capacity()));
    tile_bytes_ = bytes;
    scratch_.assign(scratch_elems_, T{});
    valid_.assign(scratch_elems_, 0);

    levels_.resize(s.num_outer + 1);
    for (const auto& d : s.dma) {
      if (d.level < 0 || d.level > s.num_outer)
        throw SimulationError(Kind::bad_plan, fmt::format("'{}': descriptor level {} out of range",
                                                          d.tensor, d.level));
      auto& at = levels_[d.level];
      if (d.direction == DmaDirection::get) {
        at.gets.push_back(&d);
      } else {
        at.puts.push_back(&d);
        if (!d.accumulate) at.fresh.push_back(d.access);
      }
    }
    for (size_t v = 0; v < nest_.def().vars.size(); ++v)
      if (nest_.def().vars[v].kind == VarKind::reduction) {
        red_roots_.push_back(VarId{static_cast<int>(v)});
        red_max_ += nest_.def().vars[v].extent - 1;
      }
    const auto order = nest_.order();
    inner_.assign(order.begin() + s.num_outer, order.end());
    values_.assign(nest_.vars().size(), 0);
    owner_.assign(bindings[LoopNest::output_access].size(), -1);
    init_ = init_value<T>(nest_.def().init);
    mul_fast_ = is_mul_of_two_loads(nest_.def().expr);
  }

  void run_pe(int pe) {
    std::fill(values_.begin(), values_.end(), 0);
    if (const auto pv = nest_.parallel_var()) {
      if (pe >= nest_.var(*pv).extent) return;
      values_[pv->value] = pe;
    } else if (pe != 0) {
      return;
    }
    pe_ = pe;
    std::fill(valid_.begin(), valid_.end(), 0);
    nest_.evaluate_vars(values_);
    stats.ldm_high_water = std::max(stats.ldm_high_water, tile_bytes_);
    run_level(0);
  }

  SimStats stats;

 private:
  struct Region {
    int64_t offset = 0;
    int64_t capacity = 0;
  };
  struct Level {
    std::vector<const DmaDescriptor*> gets, puts;
    std::vector<int> fresh;  // output tiles that start empty at this level
  };

  void run_level(int level) {
    for (int a : levels_[level].fresh)
      std::fill_n(valid_.begin() + tile_[a].offset, tile_[a].capacity, 0);
    for (const auto* d : levels_[level].gets) transfer(*d);
    if (level == s_.num_outer) {
      run_inner();
    } else {
      const VarId v = nest_.order()[level];
      const int64_t cap = loop_cap(nest_, v, values_);
      for (int64_t i = 0; i < cap; ++i) {
        values_[v.value] = i;
        nest_.evaluate_vars(values_);
        run_level(level + 1);
      }
      values_[v.value] = 0;
      nest_.evaluate_vars(values_);
    }
    for (const auto* d : levels_[level].puts) transfer(*d);
  }

  void claim(int64_t mem_index) {
    int& o = owner_[mem_index];
    if (o >= 0 && o != pe_)
      throw SimulationError(Kind::write_conflict,
                            fmt::format("'{}': PEs {} and {} both write element {} of '{}'",
                                        nest_.def().name, o, pe_, mem_index,
                                        nest_.accesses()[0].tensor.name));
    o = pe_;
  }

  void transfer(const DmaDescriptor& d) {
    const DmaTransfer x = resolve_transfer(nest_, d, values_);
    const Region& r = tile_[d.access];
    const int64_t n = x.elems();
    const std::string& name = nest_.accesses()[d.access].tensor.name;
    if (n > r.capacity)
      throw SimulationError(Kind::bad_plan, fmt::format("'{}': transfer of {} elements exceeds its {}-element tile",
                                                        name, n, r.capacity));
    const bool get = d.direction == DmaDirection::get;
    std::span<T> mem = bindings_[d.access];
    T* tile = scratch_.data() + r.offset;
    uint8_t* valid = valid_.data() + r.offset;

    std::vector<int64_t> plane(x.planes.size(), 0);
    int64_t pos = 0;
    while (n > 0) {
      int64_t row0 = x.mem_offset;
      for (size_t p = 0; p < plane.size(); ++p) row0 += plane[p] * x.planes[p].stride_elems;
      for (int64_t row = 0; row < x.count; ++row)
        for (int64_t e = 0; e < x.block_elems; ++e, ++pos) {
          const int64_t m = row0 + row * x.stride_elems + e;
          if (m < 0 || m >= static_cast<int64_t>(mem.size()))
            throw SimulationError(Kind::bad_plan, fmt::format("'{}': DMA touches element {} outside [0, {})",
                                                              name, m, mem.size()));
          if (get) {
            tile[pos] = mem[m];
            valid[pos] = 1;
          } else {
            if (!valid[pos])
              throw SimulationError(Kind::invalid_read,
                                    fmt::format("'{}': put of scratchpad cell {} that was never written",
                                                name, pos));
            claim(m);
            mem[m] = tile[pos];
          }
        }
      size_t p = 0;
      for (; p < plane.size(); ++p) {
        if (++plane[p] < x.planes[p].count) break;
        plane[p] = 0;
      }
      if (p == plane.size()) break;
    }
    if (get) std::fill(valid + n, valid + r.capacity, 0);
    (get ? stats.dma_get_count : stats.dma_put_count) += 1;
    stats.dma_bytes += n * elem_bytes(nest_.accesses()[d.access].tensor.elem);
    int64_t rows = x.count;
    for (const auto& p : x.planes) rows *= p.count;
    if (rows > 1) ++stats.dma_strided_ops;
  }

  // Where one access lives during the inner loops and how its offset moves.
  struct Cursor {
    T* data = nullptr;
    uint8_t* valid = nullptr;  // null for scalar (unbuffered) accesses
    int64_t limit = 0;
    int64_t offset = 0;
  };

  [[noreturn]] void out_of_range(int a, int64_t offset) const {
    throw SimulationError(Kind::bad_plan, fmt::format("'{}': access to '{}' at {} outside [0, {})",
                                                      nest_.def().name, nest_.accesses()[a].tensor.name,
                                                      offset, cursors_[a].limit));
  }

  T load(int a) {
    const Cursor& c = cursors_[a];
    if (c.offset < 0 || c.offset >= c.limit) out_of_range(a, c.offset);
    if (c.valid) {
      if (!c.valid[c.offset])
        throw SimulationError(Kind::invalid_read,
                              fmt::format("'{}': read of invalid scratchpad cell {} of '{}' tile",
                                          nest_.def().name, c.offset, nest_.accesses()[a].tensor.name));
    } else {
      ++stats.scalar_mem_ops;
    }
    return c.data[c.offset];
  }

  void body(int64_t red) {
    const auto& def = nest_.def();
    const int ni = static_cast<int>(def.inputs.size());
    T v;
    if (mul_fast_) {
      v = load(1) * load(2);
    } else {
      for (int i = 0; i < ni; ++i) loaded_[i] = load(1 + i);
      v = eval_expr<T>(def.expr, std::span<const T>(loaded_.data(), ni));
    }
    Cursor& out = cursors_[0];
    if (out.offset < 0 || out.offset >= out.limit) out_of_range(0, out.offset);
    T cur = v;
    if (def.reduce != ReduceKind::none) {
      cur = red == 0 ? init_ : load(0);
      if (def.reduce == ReduceKind::sum) {
        cur = cur + v;
      } else if (cur < v) {
        cur = v;
      }
    }
    if (def.epilogue != Epilogue::none && (def.reduce == ReduceKind::none || red == red_max_)) {
      if (def.bias) cur = cur + load(*nest_.bias_access());
      if (has_relu(def.epilogue) && cur < T(0)) cur = T(0);
    }
    if (out.valid) {
      out.valid[out.offset] = 1;
    } else {
      claim(out.offset);
      ++stats.scalar_mem_ops;
    }
    out.data[out.offset] = cur;
  }

  void run_inner() {
    const auto& accesses = nest_.accesses();
    const int na = static_cast<int>(accesses.size());
    const int ni = static_cast<int>(inner_.size());
    std::vector<int64_t> caps(ni);
    for (int j = 0; j < ni; ++j) {
      caps[j] = loop_cap(nest_, inner_[j], values_);
      if (caps[j] <= 0) return;
    }
    auto is_inner = [&](VarId v) { return std::find(inner_.begin(), inner_.end(), v) != inner_.end(); };

    cursors_.assign(na, Cursor{});
    std::vector<int64_t> stride(static_cast<size_t>(ni) * na, 0);  // stride[j * na + a]
    for (int a = 0; a < na; ++a) {
      const auto& acc = accesses[a];
      Cursor& c = cursors_[a];
      std::vector<int64_t> pitch(acc.tensor.rank());
      if (tile_[a].capacity > 0) {
        const DmaDescriptor* d = nullptr;
        for (const auto& x : s_.dma)
          if (x.access == a) d = &x;
        const DmaTransfer x = resolve_transfer(nest_, *d, values_);
        int64_t p = 1;
        for (int dim = 0; dim < acc.tensor.rank(); ++dim) {
          pitch[dim] = p;
          p *= x.spans[dim];
        }
        c.data = scratch_.data() + tile_[a].offset;
        c.valid = valid_.data() + tile_[a].offset;
        c.limit = tile_[a].capacity;
      } else {
        for (int dim = 0; dim < acc.tensor.rank(); ++dim) pitch[dim] = acc.tensor.pitch(dim);
        c.data = bindings_[a].data();
        c.limit = static_cast<int64_t>(bindings_[a].size());
        for (int dim = 0; dim < acc.tensor.rank(); ++dim)
          c.offset += pitch[dim] * acc.indices[dim].evaluate([&](VarId v) { return values_[v.value]; });
      }
      for (int dim = 0; dim < acc.tensor.rank(); ++dim)
        for (const auto& t : acc.indices[dim].terms) {
          const auto it = std::find(inner_.begin(), inner_.end(), t.var);
          if (it != inner_.end()) {
            stride[(it - inner_.begin()) * na + a] += pitch[dim] * t.coeff;
          } else {
            for (VarId l : nest_.leaves_of(t.var))
              if (is_inner(l))
                throw SimulationError(Kind::bad_plan,
                                      fmt::format("'{}': index of '{}' is not affine in inner loop '{}'",
                                                  nest_.def().name, acc.tensor.name, nest_.var(l).name));
          }
        }
    }

    // Sum of the root reduction variables: 0 on an element's first visit,
    // red_max_ on its last.
    auto red_sum = [&] {
      int64_t r = 0;
      for (VarId v : red_roots_) r += values_[v.value];
      return r;
    };
    int64_t red = red_sum();
    std::vector<int64_t> red_stride(ni);
    for (int j = 0; j < ni; ++j) {
      values_[inner_[j].value] = 1;
      nest_.evaluate_vars(values_);
      red_stride[j] = red_sum() - red;
      values_[inner_[j].value] = 0;
    }
    nest_.evaluate_vars(values_);
    loaded_.resize(nest_.def().inputs.size());

    int64_t total = 1;
    for (int64_t c : caps) total *= c;
    stats.steps += total;
    if (ni == 0) {
      body(red);
      return;
    }
    auto advance = [&](int j, int64_t times) {
      for (int a = 0; a < na; ++a) cursors_[a].offset += stride[j * na + a] * times;
      red += red_stride[j] * times;
    };
    std::vector<int64_t> count(ni, 0);
    const int last = ni - 1;
    while (true) {
      for (int64_t i = 0; i < caps[last]; ++i) {
        body(red);
        advance(last, 1);
      }
      advance(last, -caps[last]);
      int j = last - 1;
      for (; j >= 0; --j) {
        advance(j, 1);
        if (++count[j] < caps[j]) break;
        advance(j, -caps[j]);
        count[j] = 0;
      }
      if (j < 0) break;
    }
  }

  const ScheduledNest& s_;
  const LoopNest& nest_;
  std::span<const Binding<T>> bindings_;
  std::vector<Region> tile_;
  int64_t scratch_elems_ = 0;
  int64_t tile_bytes_ = 0;
  std::vector<T> scratch_;
  std::vector<uint8_t> valid_;
  std::vector<Level> levels_;
  std::vector<VarId> red_roots_;
  int64_t red_max_ = 0;
  std::vector<VarId> inner_;
  std::vector<int64_t> values_;
  std::vector<int> owner_;
  std::vector<Cursor> cursors_;
  std::vector<T> loaded_;
  T init_{};
  bool mul_fast_ = false;
  int pe_ = 0;
};

}  // namespace

template <class T>
SimStats simulate_nest(const ScheduledNest& s, const MachineConfig& machine,
                       std::span<const Binding<T>> bindings, const SimOptions& options) {
  NestRunner<T> runner(s, machine, bindings);
  std::vector<int> order = options.pe_order;
  if (order.empty()) {
    order.resize(machine.num_pes);
    std::iota(order.begin(), order.end(), 0);
  }
  for (int pe : order) runner.run_pe(pe);
  return runner.stats;
}

template <class T>
SimStats simulate_nest(const ScheduledNest& s, const MachineConfig& machine, TensorMap<T>& data,
                       const SimOptions& options) {
  std::vector<Binding<T>> bindings;
  for (const auto& acc : s.nest.accesses()) {
    auto it = data.find(acc.tensor.name);
    if (it == data.end()) it = data.emplace(acc.tensor.name, std::vector<T>(acc.tensor.num_elems(), T(0))).first;
    bindings.emplace_back(it->second);
  }
  return simulate_nest<T>(s, machine, std::span<const Binding<T>>(bindings), options);
}

template SimStats simulate_nest<float>(const ScheduledNest&, const MachineConfig&,
                                       std::span<const Binding<float>>, const SimOptions&);
template SimStats simulate_nest<int32_t>(const ScheduledNest&, const MachineConfig&,
                                         std::span<const Binding<int32_t>>, const SimOptions&);
template SimStats simulate_nest<float>(const ScheduledNest&, const MachineConfig&, TensorMap<float>&,
                                       const SimOptions&);
template SimStats simulate_nest<int32_t>(const ScheduledNest&, const MachineConfig&, TensorMap<int32_t>&,
                                         const SimOptions&);

}  // namespace swsched
