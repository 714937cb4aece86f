#include "swsched/workload.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "swsched/error.hpp"

namespace swsched {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& at, std::string_view what) {
  throw ParseError(fmt::format("{}: {}", at.empty() ? "/" : at, what));
}

void check_keys(const json& j, const std::string& at, const std::vector<std::string>& allowed) {
  if (!j.is_object()) fail(at, "must be an object");
  for (const auto& [key, v] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      fail(at, fmt::format("unknown field '{}'", key));
}

const json& member(const json& j, const std::string& at, const char* key) {
  if (!j.contains(key)) fail(at, fmt::format("missing field '{}'", key));
  return j.at(key);
}

std::string as_string(const json& j, const std::string& at) {
  if (!j.is_string()) fail(at, "must be a string");
  return j.get<std::string>();
}

int64_t as_int(const json& j, const std::string& at, int64_t min) {
  if (!j.is_number_integer()) fail(at, "must be an integer");
  const auto v = j.get<int64_t>();
  if (v < min) fail(at, fmt::format("must be at least {}", min));
  return v;
}

bool as_bool(const json& j, const std::string& at) {
  if (!j.is_boolean()) fail(at, "must be a boolean");
  return j.get<bool>();
}

std::vector<std::string> as_names(const json& j, const std::string& at) {
  if (!j.is_array()) fail(at, "must be an array of names");
  std::vector<std::string> out;
  for (size_t i = 0; i < j.size(); ++i) out.push_back(as_string(j[i], fmt::format("{}/{}", at, i)));
  return out;
}

LayerAttrs parse_attrs(const json& j, const std::string& at, LayerKind kind) {
  check_keys(j, at, attr_keys(kind));
  LayerAttrs a;
  for (const auto& [key, v] : j.items()) {
    const std::string p = at + "/" + key;
    if (key == "filters") a.filters = as_int(v, p, 1);
    else if (key == "units") a.units = as_int(v, p, 1);
    else if (key == "kernel") a.kernel = as_int(v, p, 1);
    else if (key == "stride") a.stride = as_int(v, p, 1);
    else if (key == "pad") a.pad = as_int(v, p, 0);
    else if (key == "bias") a.bias = as_bool(v, p);
    else if (key == "relu") a.relu = as_bool(v, p);
  }
  if (kind == LayerKind::conv2d && a.filters == 0) fail(at, "conv2d needs 'filters'");
  if (kind == LayerKind::dense && a.units == 0) fail(at, "dense needs 'units'");
  return a;
}

json attrs_to_json(const Layer& l) {
  json j = json::object();
  const auto& a = l.attrs;
  for (const auto& key : attr_keys(l.kind)) {
    if (key == "filters") j[key] = a.filters;
    else if (key == "units") j[key] = a.units;
    else if (key == "kernel") j[key] = a.kernel;
    else if (key == "stride") j[key] = a.stride;
    else if (key == "pad") j[key] = a.pad;
    else if (key == "bias") j[key] = a.bias;
    else if (key == "relu") j[key] = a.relu;
  }
  return j;
}

std::pair<int, int> line_col(std::string_view text, size_t byte) {
  int line = 1, col = 1;
  for (size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

const std::vector<std::string>& workload_keys() {
  static const std::vector<std::string> k{"name", "elem", "machine", "inputs", "layers", "plan"};
  return k;
}
const std::vector<std::string>& machine_keys() {
  static const std::vector<std::string> k{"ldm_bytes", "num_pes", "init_chunk", "ldm_reserve"};
  return k;
}
const std::vector<std::string>& input_keys() {
  static const std::vector<std::string> k{"name", "shape"};
  return k;
}
const std::vector<std::string>& layer_keys() {
  static const std::vector<std::string> k{"name", "kind", "inputs", "attrs", "schedule"};
  return k;
}

const std::vector<std::string>& attr_keys(LayerKind kind) {
  static const std::vector<std::string> conv{"filters", "kernel", "stride", "pad", "bias", "relu"};
  static const std::vector<std::string> dense{"units", "bias", "relu"};
  static const std::vector<std::string> pool{"kernel", "stride"};
  static const std::vector<std::string> none;
  switch (kind) {
    case LayerKind::conv2d: return conv;
    case LayerKind::dense: return dense;
    case LayerKind::maxpool: return pool;
    default: return none;
  }
}

Workload workload_from_json(const json& j) {
  check_keys(j, "", workload_keys());
  Workload w;
  w.graph.name = as_string(member(j, "", "name"), "/name");
  if (j.contains("elem")) {
    try {
      w.graph.elem = parse_elem_kind(as_string(j["elem"], "/elem"));
    } catch (const ParseError& e) {
      fail("/elem", e.what());
    }
  }
  if (j.contains("machine")) {
    const json& m = j["machine"];
    check_keys(m, "/machine", machine_keys());
    if (m.contains("ldm_bytes")) w.machine.ldm_bytes = as_int(m["ldm_bytes"], "/machine/ldm_bytes", 1);
    if (m.contains("num_pes")) w.machine.num_pes = static_cast<int>(as_int(m["num_pes"], "/machine/num_pes", 1));
    if (m.contains("init_chunk")) w.machine.init_chunk = as_int(m["init_chunk"], "/machine/init_chunk", 1);
    if (m.contains("ldm_reserve")) w.machine.ldm_reserve = as_int(m["ldm_reserve"], "/machine/ldm_reserve", 0);
  }
  const json& inputs = member(j, "", "inputs");
  if (!inputs.is_array()) fail("/inputs", "must be an array");
  for (size_t i = 0; i < inputs.size(); ++i) {
    const std::string at = fmt::format("/inputs/{}", i);
    check_keys(inputs[i], at, input_keys());
    TensorDecl t;
    t.name = as_string(member(inputs[i], at, "name"), at + "/name");
    const json& shape = member(inputs[i], at, "shape");
    if (!shape.is_array() || shape.empty()) fail(at + "/shape", "must be a non-empty array");
    for (size_t d = shape.size(); d-- > 0;) t.shape.push_back(as_int(shape[d], fmt::format("{}/shape/{}", at, d), 1));
    t.elem = w.graph.elem;
    w.graph.inputs.push_back(std::move(t));
  }
  const json& layers = member(j, "", "layers");
  if (!layers.is_array()) fail("/layers", "must be an array");
  for (size_t i = 0; i < layers.size(); ++i) {
    const std::string at = fmt::format("/layers/{}", i);
    const json& lj = layers[i];
    check_keys(lj, at, layer_keys());
    Layer l;
    l.name = as_string(member(lj, at, "name"), at + "/name");
    try {
      l.kind = parse_layer_kind(as_string(member(lj, at, "kind"), at + "/kind"));
    } catch (const ParseError& e) {
      if (std::string_view(e.what()).starts_with("/")) throw;
      fail(at + "/kind", e.what());
    }
    l.inputs = as_names(member(lj, at, "inputs"), at + "/inputs");
    l.attrs = parse_attrs(lj.contains("attrs") ? lj["attrs"] : json::object(), at + "/attrs", l.kind);
    if (lj.contains("schedule")) {
      try {
        l.schedule = overrides_from_json(lj["schedule"]);
      } catch (const ParseError& e) {
        fail(at + "/schedule", e.what());
      }
    }
    w.graph.layers.push_back(std::move(l));
  }
  try {
    infer_shapes(w.graph);
  } catch (const IrError& e) {
    fail("", e.what());
  }
  return w;
}

json to_json(const Workload& w) {
  json j;
  j["name"] = w.graph.name;
  j["elem"] = std::string(to_string(w.graph.elem));
  j["machine"] = {{"ldm_bytes", w.machine.ldm_bytes},
                  {"num_pes", w.machine.num_pes},
                  {"init_chunk", w.machine.init_chunk},
                  {"ldm_reserve", w.machine.ldm_reserve}};
  j["inputs"] = json::array();
  for (const auto& t : w.graph.inputs)
    j["inputs"].push_back({{"name", t.name}, {"shape", std::vector<int64_t>(t.shape.rbegin(), t.shape.rend())}});
  j["layers"] = json::array();
  for (const auto& l : w.graph.layers) {
    json lj{{"name", l.name}, {"kind", std::string(to_string(l.kind))}, {"inputs", l.inputs}};
    if (!attr_keys(l.kind).empty()) lj["attrs"] = attrs_to_json(l);
    if (!l.schedule.empty()) lj["schedule"] = to_json(l.schedule);
    j["layers"].push_back(std::move(lj));
  }
  return j;
}

Workload parse_workload(std::string_view text, std::string_view source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError(fmt::format("{}:{}:{}: malformed JSON ({})", source, line, col, e.what()));
  }
  try {
    return workload_from_json(j);
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", source, e.what()));
  }
}

Workload load_workload(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(fmt::format("cannot read workload '{}'", path.string()));
  std::ostringstream text;
  text << in.rdbuf();
  return parse_workload(text.str(), path.string());
}

json plan_workload_json(const ProgramPlan& program) {
  Workload w{program.graph, program.machine};
  for (auto& l : w.graph.layers)
    for (const auto& lp : program.layers)
      if (lp.name == l.name) l.schedule = overrides_of(lp.ops.back().sched);
  json j = to_json(w);
  json plan;
  plan["arena_bytes"] = program.memory.arena_bytes;
  plan["workspace_offset"] = program.memory.workspace_offset;
  plan["workspace_bytes"] = program.memory.workspace_bytes;
  plan["tensors"] = json::array();
  for (const auto* list : {&program.memory.persistent, &program.memory.temps})
    for (const auto& a : *list)
      plan["tensors"].push_back({{"name", a.tensor.name},
                                 {"role", std::string(to_string(a.role))},
                                 {"offset", a.offset},
                                 {"bytes", a.bytes}});
  int64_t total = 0;
  plan["layers"] = json::array();
  for (const auto& lp : program.layers) {
    json ops = json::array();
    for (const auto& op : lp.ops) {
      ops.push_back(to_json(op.sched));
      total += op.sched.predicted_dma_execs;
    }
    plan["layers"].push_back({{"name", lp.name}, {"ops", std::move(ops)}});
  }
  plan["predicted_dma_execs"] = total;
  plan["outputs"] = program.outputs;
  j["plan"] = std::move(plan);
  return j;
}

}  // namespace swsched
