#include "swsched/graph.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <fmt/format.h>

#include "swsched/error.hpp"
#include "swsched/ops.hpp"

namespace swsched {

namespace {

constexpr std::pair<LayerKind, std::string_view> kKindNames[] = {
    {LayerKind::conv2d, "conv2d"},   {LayerKind::dense, "dense"}, {LayerKind::maxpool, "maxpool"},
    {LayerKind::flatten, "flatten"}, {LayerKind::relu, "relu"},   {LayerKind::add, "add"},
    {LayerKind::matmul, "matmul"},   {LayerKind::vector_mul, "vector_mul"},
};

bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

// Shapes below are written outermost first and stored innermost first.
TensorDecl decl(std::string name, std::vector<int64_t> outer_first, ElemKind elem) {
  return TensorDecl{std::move(name), {outer_first.rbegin(), outer_first.rend()}, elem};
}

void require(bool ok, const Layer& l, std::string_view what) {
  if (!ok) throw IrError(fmt::format("layer '{}' ({}): {}", l.name, to_string(l.kind), what));
}

size_t arity(LayerKind k) {
  switch (k) {
    case LayerKind::add:
    case LayerKind::matmul:
    case LayerKind::vector_mul: return 2;
    default: return 1;
  }
}

Epilogue epilogue_of(const LayerAttrs& a) {
  if (a.bias) return a.relu ? Epilogue::bias_relu : Epilogue::bias;
  return a.relu ? Epilogue::relu : Epilogue::none;
}

LayerTensors layer_tensors(const Layer& l, const std::vector<TensorDecl>& in, ElemKind elem) {
  require(in.size() == arity(l.kind), l, fmt::format("expects {} inputs, got {}", arity(l.kind), in.size()));
  const auto& a = l.attrs;
  const TensorDecl& x = in[0];
  LayerTensors t;
  switch (l.kind) {
    case LayerKind::conv2d: {
      require(x.rank() == 3, l, "input must be CHW");
      require(a.filters > 0 && a.kernel > 0 && a.stride > 0 && a.pad >= 0, l, "bad attributes");
      const int64_t c = x.shape[2], h = x.shape[1] + 2 * a.pad, w = x.shape[0] + 2 * a.pad;
      require(h >= a.kernel && w >= a.kernel, l, "kernel larger than the padded input");
      t.output = decl(l.name, {a.filters, (h - a.kernel) / a.stride + 1, (w - a.kernel) / a.stride + 1}, elem);
      t.params.push_back(decl(l.name + "_w", {a.filters, c, a.kernel, a.kernel}, elem));
      if (a.bias) t.params.push_back(decl(l.name + "_b", {a.filters}, elem));
      if (a.pad > 0) t.temps.push_back(decl(l.name + "_padded", {c, h, w}, elem));
      break;
    }
    case LayerKind::dense:
      require(x.rank() == 1, l, "input must be flattened");
      require(a.units > 0, l, "units must be positive");
      t.output = decl(l.name, {a.units}, elem);
      t.params.push_back(decl(l.name + "_w", {a.units, x.shape[0]}, elem));
      if (a.bias) t.params.push_back(decl(l.name + "_b", {a.units}, elem));
      break;
    case LayerKind::maxpool: {
      require(x.rank() == 3, l, "input must be CHW");
      require(a.kernel > 0 && a.stride > 0 && a.pad == 0, l, "bad attributes (padding unsupported)");
      require(x.shape[1] >= a.kernel && x.shape[0] >= a.kernel, l, "window larger than the input");
      t.output = decl(l.name,
                      {x.shape[2], (x.shape[1] - a.kernel) / a.stride + 1, (x.shape[0] - a.kernel) / a.stride + 1},
                      elem);
      break;
    }
    case LayerKind::flatten: t.output = decl(l.name, {x.num_elems()}, elem); break;
    case LayerKind::relu: t.output = TensorDecl{l.name, x.shape, elem}; break;
    case LayerKind::add:
    case LayerKind::vector_mul:
      require(x.shape == in[1].shape, l, "operand shapes differ");
      require(l.kind == LayerKind::add || x.rank() == 1, l, "operands must be 1-D");
      t.output = TensorDecl{l.name, x.shape, elem};
      break;
    case LayerKind::matmul:
      require(x.rank() == 2 && in[1].rank() == 2 && x.shape[0] == in[1].shape[1], l,
              "operands must be [X][K] and [K][Y]");
      t.output = decl(l.name, {x.shape[1], in[1].shape[0]}, elem);
      break;
  }
  return t;
}

template <class T>
void fill_random(std::vector<T>& v, std::mt19937_64& rng, double scale) {
  if constexpr (std::is_floating_point_v<T>) {
    std::uniform_real_distribution<double> d(-scale, scale);
    for (auto& x : v) x = static_cast<T>(d(rng));
  } else {
    std::uniform_int_distribution<int> d(-2, 2);
    for (auto& x : v) x = static_cast<T>(d(rng));
  }
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  for (const auto& [k, n] : kKindNames)
    if (k == kind) return n;
  return "?";
}

LayerKind parse_layer_kind(std::string_view text) {
  for (const auto& [k, n] : kKindNames)
    if (n == text) return k;
  throw ParseError(fmt::format("unsupported layer kind '{}'", text));
}

std::string_view to_string(TensorRole role) {
  switch (role) {
    case TensorRole::input: return "input";
    case TensorRole::param: return "param";
    case TensorRole::activation: return "activation";
    case TensorRole::temp: return "temp";
  }
  return "?";
}

const Layer* LayerGraph::find(std::string_view layer) const {
  for (const auto& l : layers)
    if (l.name == layer) return &l;
  return nullptr;
}

std::vector<int> topo_schedule(const LayerGraph& graph) {
  const int n = static_cast<int>(graph.layers.size());
  std::map<std::string, int, std::less<>> index;
  for (int i = 0; i < n; ++i)
    if (!index.emplace(graph.layers[i].name, i).second)
      throw IrError(fmt::format("duplicate layer name '{}'", graph.layers[i].name));
  std::set<std::string, std::less<>> inputs;
  for (const auto& t : graph.inputs) inputs.insert(t.name);

  std::vector<std::vector<int>> deps(n);
  for (int i = 0; i < n; ++i)
    for (const auto& src : graph.layers[i].inputs) {
      if (auto it = index.find(src); it != index.end()) {
        deps[i].push_back(it->second);
      } else if (!inputs.count(src)) {
        throw IrError(fmt::format("layer '{}' reads unknown tensor '{}'", graph.layers[i].name, src));
      }
    }
  std::vector<int> order;
  std::vector<char> done(n, 0);
  while (static_cast<int>(order.size()) < n) {
    int pick = -1;
    for (int i = 0; i < n && pick < 0; ++i)
      if (!done[i] && std::all_of(deps[i].begin(), deps[i].end(), [&](int d) { return done[d] != 0; })) pick = i;
    if (pick < 0) throw IrError(fmt::format("graph '{}' has a cycle", graph.name));
    done[pick] = 1;
    order.push_back(pick);
  }
  return order;
}

std::map<std::string, LayerTensors, std::less<>> infer_shapes(const LayerGraph& graph) {
  std::map<std::string, TensorDecl, std::less<>> known;
  std::set<std::string, std::less<>> names;
  auto claim = [&](const TensorDecl& t) {
    if (!is_identifier(t.name)) throw IrError(fmt::format("tensor name '{}' is not an identifier", t.name));
    if (!names.insert(t.name).second) throw IrError(fmt::format("duplicate tensor name '{}'", t.name));
    for (int64_t e : t.shape)
      if (e < 1) throw IrError(fmt::format("tensor '{}' has a non-positive extent", t.name));
  };
  for (const auto& t : graph.inputs) {
    claim(t);
    known.emplace(t.name, t);
  }
  std::map<std::string, LayerTensors, std::less<>> out;
  for (int i : topo_schedule(graph)) {
    const Layer& l = graph.layers[i];
    std::vector<TensorDecl> in;
    for (const auto& src : l.inputs) in.push_back(known.at(src));
    LayerTensors t = layer_tensors(l, in, graph.elem);
    claim(t.output);
    for (const auto& p : t.params) claim(p);
    for (const auto& p : t.temps) claim(p);
    known.emplace(l.name, t.output);
    out.emplace(l.name, std::move(t));
  }
  return out;
}

const Allocation* MemoryPlan::find(std::string_view tensor) const {
  for (const auto* list : {&persistent, &temps})
    for (const auto& a : *list)
      if (a.tensor.name == tensor) return &a;
  return nullptr;
}

const Allocation& MemoryPlan::at(std::string_view tensor) const {
  if (const auto* a = find(tensor)) return *a;
  throw IrError(fmt::format("tensor '{}' has no allocation", tensor));
}

MemoryPlan plan_memory(const LayerGraph& graph) {
  const auto shapes = infer_shapes(graph);
  MemoryPlan m;
  int64_t top = 0;
  auto place = [&](const TensorDecl& t, TensorRole role) {
    m.persistent.push_back(Allocation{t, role, top, t.bytes()});
    top += t.bytes();
  };
  for (const auto& t : graph.inputs) place(t, TensorRole::input);
  const auto order = topo_schedule(graph);
  for (int i : order) {
    const auto& lt = shapes.at(graph.layers[i].name);
    for (const auto& p : lt.params) place(p, TensorRole::param);
    place(lt.output, TensorRole::activation);
  }
  m.workspace_offset = top;
  for (int i : order) {
    int64_t used = 0;
    for (const auto& t : shapes.at(graph.layers[i].name).temps) {
      m.temps.push_back(Allocation{t, TensorRole::temp, m.workspace_offset + used, t.bytes()});
      used += t.bytes();
    }
    m.workspace_bytes = std::max(m.workspace_bytes, used);
  }
  m.arena_bytes = top + m.workspace_bytes;
  return m;
}

std::vector<TensorDecl> ProgramPlan::params() const {
  std::vector<TensorDecl> out;
  for (const auto& a : memory.persistent)
    if (a.role == TensorRole::param) out.push_back(a.tensor);
  return out;
}

ProgramPlan lower_graph(const LayerGraph& graph, const MachineConfig& machine) {
  machine.validate();
  ProgramPlan p{graph, machine, plan_memory(graph), {}, {}};
  const auto shapes = infer_shapes(graph);
  std::map<std::string, TensorDecl, std::less<>> decls;
  for (const auto& t : graph.inputs) decls.emplace(t.name, t);
  for (const auto& [name, lt] : shapes) decls.emplace(name, lt.output);

  std::set<std::string> consumed;
  for (int i : topo_schedule(graph)) {
    const Layer& l = graph.layers[i];
    const LayerTensors& lt = shapes.at(l.name);
    std::vector<TensorDecl> in;
    for (const auto& src : l.inputs) {
      in.push_back(decls.at(src));
      consumed.insert(src);
    }
    LayerPlan lp;
    lp.name = l.name;
    lp.kind = l.kind;
    auto add_op = [&](std::string name, ComputeDef def, const ScheduleOverrides& o) {
      ScheduledNest s = schedule_nest(def, machine, o);
      lp.ops.push_back(SubOp{std::move(name), std::move(def), std::move(s)});
    };
    const ScheduleOverrides none;
    const Epilogue ep = epilogue_of(l.attrs);
    const std::optional<TensorDecl> bias =
        l.attrs.bias && lt.params.size() > 1 ? std::optional<TensorDecl>(lt.params[1]) : std::nullopt;
    switch (l.kind) {
      case LayerKind::conv2d: {
        TensorDecl src = in[0];
        if (l.attrs.pad > 0) {
          const TensorDecl& padded = lt.temps[0];
          add_op(l.name + "_fill", ops::fill(l.name + "_fill", padded, 0.0), none);
          add_op(l.name + "_pad", ops::pad_interior(l.name + "_pad", padded, in[0], l.attrs.pad), none);
          src = padded;
        }
        add_op(l.name, ops::conv2d(l.name, lt.output, src, lt.params[0], l.attrs.stride, bias, ep), l.schedule);
        break;
      }
      case LayerKind::dense:
        add_op(l.name, ops::dense(l.name, lt.output, in[0], lt.params[0], bias, ep), l.schedule);
        break;
      case LayerKind::maxpool:
        add_op(l.name, ops::maxpool(l.name, lt.output, in[0], l.attrs.kernel, l.attrs.stride), l.schedule);
        break;
      case LayerKind::flatten: add_op(l.name, ops::flatten(l.name, lt.output, in[0]), l.schedule); break;
      case LayerKind::relu: add_op(l.name, ops::relu(l.name, lt.output, in[0]), l.schedule); break;
      case LayerKind::add: add_op(l.name, ops::add(l.name, lt.output, in[0], in[1]), l.schedule); break;
      case LayerKind::matmul: add_op(l.name, ops::matmul(l.name, lt.output, in[0], in[1]), l.schedule); break;
      case LayerKind::vector_mul:
        add_op(l.name, ops::vector_mul(l.name, lt.output, in[0], in[1]), l.schedule);
        break;
    }
    for (const auto& op : lp.ops)
      for (const auto& acc : op.sched.nest.accesses())
        if (std::find(lp.tensors.begin(), lp.tensors.end(), acc.tensor.name) == lp.tensors.end())
          lp.tensors.push_back(acc.tensor.name);
    for (const auto& t : lp.tensors) lp.record.push_back(ParamField{t + "_off", p.memory.at(t).offset});
    for (const auto& op : lp.ops)
      if (op.sched.partition) {
        lp.record.push_back(ParamField{op.name + "_pe_extent", op.sched.partition->extent});
        lp.record.push_back(ParamField{op.name + "_pe_chunk", op.sched.partition->chunk});
      }
    for (const auto& t : lt.temps) {
      lp.temps.push_back(t.name);
      lp.temp_bytes += t.bytes();
    }
    p.layers.push_back(std::move(lp));
  }
  for (const auto& lp : p.layers)
    if (!consumed.count(lp.name)) p.outputs.push_back(lp.name);
  return p;
}

template <class T>
TensorMap<T> seeded_data(const LayerGraph& graph, uint64_t seed) {
  std::mt19937_64 rng(seed);
  TensorMap<T> data;
  for (const auto& t : graph.inputs) fill_random(data[t.name] = std::vector<T>(t.num_elems()), rng, 1.0);
  const auto shapes = infer_shapes(graph);
  for (int i : topo_schedule(graph)) {
    const auto& lt = shapes.at(graph.layers[i].name);
    if (lt.params.empty()) continue;
    const TensorDecl& w = lt.params[0];
    const double fan_in = static_cast<double>(w.num_elems() / w.shape.back());
    const double scale = std::sqrt(6.0 / fan_in);
    for (const auto& prm : lt.params) fill_random(data[prm.name] = std::vector<T>(prm.num_elems()), rng, scale);
  }
  return data;
}

template <class T>
TensorMap<T> zero_data(const LayerGraph& graph) {
  TensorMap<T> data;
  for (const auto& t : graph.inputs) data[t.name] = std::vector<T>(t.num_elems(), T(0));
  for (const auto& [name, lt] : infer_shapes(graph))
    for (const auto& prm : lt.params) data[prm.name] = std::vector<T>(prm.num_elems(), T(0));
  return data;
}

template TensorMap<float> seeded_data<float>(const LayerGraph&, uint64_t);
template TensorMap<int32_t> seeded_data<int32_t>(const LayerGraph&, uint64_t);
template TensorMap<float> zero_data<float>(const LayerGraph&);
template TensorMap<int32_t> zero_data<int32_t>(const LayerGraph&);

}  // namespace swsched
