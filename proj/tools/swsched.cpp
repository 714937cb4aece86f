// swsched: compile, simulate and explain workloads for the core-group target.
//
// Exit codes: 0 ok, 1 usage or parse error, 2 infeasible plan, 3 verification
// failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"

#include "swsched/codegen.hpp"
#include "swsched/error.hpp"
#include "swsched/params_blob.hpp"
#include "swsched/program.hpp"
#include "swsched/workload.hpp"

namespace fs = std::filesystem;
using namespace swsched;

namespace {

enum Exit { kOk = 0, kUsage = 1, kInfeasible = 2, kVerification = 3 };

struct MachineFlags {
  std::optional<int64_t> ldm_bytes, num_pes, init_chunk;

  void add(CLI::App* cmd) {
    cmd->add_option("--ldm-bytes", ldm_bytes, "Scratchpad bytes per PE");
    cmd->add_option("--num-pes", num_pes, "Processing elements");
    cmd->add_option("--init-chunk", init_chunk, "Initial tile extent in elements");
  }
  void apply(MachineConfig& m) const {
    if (ldm_bytes) m.ldm_bytes = *ldm_bytes;
    if (num_pes) m.num_pes = static_cast<int>(*num_pes);
    if (init_chunk) m.init_chunk = *init_chunk;
  }
};

struct TraceFlags {
  bool trace = false, explain_order = false, dump_dma = false;

  void add(CLI::App* cmd) {
    cmd->add_flag("--trace", trace, "Scratchpad planner checkpoints");
    cmd->add_flag("--explain-order", explain_order, "Loop order candidates and permutation costs");
    cmd->add_flag("--dump-dma", dump_dma, "DMA descriptors");
  }
  bool any() const { return trace || explain_order || dump_dma; }
};

/// A path when one exists, otherwise a bundled workload name with or without
/// the ".json" suffix.
Workload resolve_workload(const std::string& arg) {
  if (fs::exists(arg)) return load_workload(arg);
  std::string name = fs::path(arg).filename().string();
  if (name.ends_with(".json")) name.resize(name.size() - 5);
  const auto& names = bundled_workload_names();
  if (std::find(names.begin(), names.end(), name) == names.end())
    throw ParseError(fmt::format("{}: no such file or bundled workload", arg));
  return bundled_workload(name);
}

ProgramPlan plan_for(const std::string& arg, const MachineFlags& flags) {
  Workload w = resolve_workload(arg);
  flags.apply(w.machine);
  return lower_graph(w.graph, w.machine);
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("{}: cannot write", path.string()));
  out << j.dump(2) << "\n";
}

std::string var_name(const ScheduledNest& s, VarId id) {
  for (const auto& v : s.order_problem.outer)
    if (v.id == id) return v.name;
  return "?";
}

// One entry per operator; `flags` selects the sections, all when none is set.
nlohmann::json explain_json(const ProgramPlan& program, const TraceFlags& flags, const std::string& only) {
  const bool all = !flags.any();
  nlohmann::json out = nlohmann::json::array();
  for (const auto& layer : program.layers) {
    if (!only.empty() && layer.name != only) continue;
    for (const auto& op : layer.ops) {
      const auto& s = op.sched;
      nlohmann::json e{{"layer", layer.name}, {"op", op.name}, {"tile_bytes", s.tile_bytes},
                       {"num_pes", s.num_pes}, {"predicted_dma_execs", s.predicted_dma_execs}};
      if (all || flags.trace) {
        e["planner"] = {{"capacity_bytes", s.plan.capacity_bytes}, {"trace", trace_to_json(s.plan)}};
      }
      if (all || flags.explain_order) {
        e["order"] = to_json(s.order_problem, s.order_report);
        if (s.order_problem.outer.size() <= 6) {
          nlohmann::json perms = nlohmann::json::array();
          for (const auto& c : enumerate_orders(s.order_problem)) {
            nlohmann::json names = nlohmann::json::array();
            for (VarId id : c.order) names.push_back(var_name(s, id));
            perms.push_back({{"order", names}, {"total_dma_execs", c.total}});
          }
          e["permutations"] = perms;
        }
      }
      if (all || flags.dump_dma) {
        nlohmann::json d = nlohmann::json::array();
        for (const auto& desc : s.dma) d.push_back(to_json(desc));
        e["dma"] = d;
      }
      out.push_back(std::move(e));
    }
  }
  return out;
}

std::string join_names(const nlohmann::json& names) {
  std::string s;
  for (const auto& n : names) s += (s.empty() ? "" : ", ") + n.get<std::string>();
  return "[" + s + "]";
}

void print_explain(const nlohmann::json& ops) {
  for (const auto& e : ops) {
    fmt::print("{} / {}: {} PE(s), {} B of tiles, {} DMA executions\n", e["layer"].get<std::string>(),
               e["op"].get<std::string>(), e["num_pes"].get<int>(), e["tile_bytes"].get<int64_t>(),
               e["predicted_dma_execs"].get<int64_t>());
    if (e.contains("planner")) {
      fmt::print("  planner, capacity {} B\n", e["planner"]["capacity_bytes"].get<int64_t>());
      for (const auto& c : e["planner"]["trace"])
        fmt::print("    {:<9} {:<8} Buffer {:<6} {:>8} B\n", c["decision"].get<std::string>(),
                   c["var"].get<std::string>(), c["Buffer"].get<int64_t>(), c["usage_bytes"].get<int64_t>());
    }
    if (e.contains("order")) {
      const auto& o = e["order"];
      fmt::print("  order {} ({} DMA executions per PE{})\n", join_names(o["order"]),
                 o["total_dma_execs"].get<int64_t>(), o["exhaustive"].get<bool>() ? "" : ", estimated");
      for (const auto& step : o["steps"]) {
        std::string cands;
        for (const auto& c : step["candidates"])
          cands += fmt::format(" {}={}", c["var"].get<std::string>(), c["cost"].get<int64_t>());
        fmt::print("    chose {:<8}{}\n", step["chosen"].get<std::string>(), cands);
      }
      if (e.contains("permutations"))
        for (const auto& p : e["permutations"])
          fmt::print("    permutation {} costs {}\n", join_names(p["order"]), p["total_dma_execs"].get<int64_t>());
    }
    if (e.contains("dma")) {
      for (const auto& d : e["dma"])
        fmt::print("  {} {} at level {}: {} x {} elems, stride {}\n", d["direction"].get<std::string>(),
                   d["tensor"].get<std::string>(), d["level"].get<int>(), d["count"].get<int64_t>(),
                   d["block_elems"].get<int64_t>(), d["stride_elems"].get<int64_t>());
    }
  }
}

int64_t predicted_execs(const LayerPlan& layer) {
  int64_t n = 0;
  for (const auto& op : layer.ops) n += op.sched.predicted_dma_execs;
  return n;
}

struct SimulateArgs {
  std::string workload, params, input, output, stats, arena_dump;
  bool check = false, zero_init = false;
  double tol = 1e-4;
  uint64_t seed = 7;
};

// Tensors from `path` override the prepared values; a missing file is an
// error unless zeros were requested.
template <class T>
void merge_blob(TensorMap<T>& data, const std::vector<TensorDecl>& decls, const std::string& path, bool zero_init) {
  if (path.empty()) return;
  if (!fs::exists(path)) {
    if (zero_init) return;
    throw ParseError(fmt::format("{}: no such blob (use --zero-init to run on zeros)", path));
  }
  for (auto& [name, values] : from_records<T>(decls, read_blob(path))) data[name] = std::move(values);
}

template <class T>
int simulate(const ProgramPlan& program, const SimulateArgs& a) {
  TensorMap<T> data = a.zero_init ? zero_data<T>(program.graph) : seeded_data<T>(program.graph, a.seed);
  merge_blob(data, program.params(), a.params, a.zero_init);
  merge_blob(data, program.graph.inputs, a.input, a.zero_init);

  const auto result = simulate_program<T>(program, data);

  nlohmann::json layers = nlohmann::json::array();
  int64_t predicted = 0;
  for (size_t i = 0; i < program.layers.size(); ++i) {
    const auto& [name, stats] = result.layer_stats[i];
    const int64_t p = predicted_execs(program.layers[i]);
    predicted += p;
    layers.push_back({{"name", name}, {"stats", to_json(stats)}, {"predicted_dma_execs", p}});
    spdlog::info("{}: {} DMA executions, {} bytes", name, stats.dma_execs(), stats.dma_bytes);
  }
  nlohmann::json report{{"workload", program.graph.name}, {"total", to_json(result.total)},
                        {"predicted_dma_execs", predicted}, {"layers", layers}};
  fmt::print("{}: {} DMA executions ({} predicted), {} bytes moved, {} scalar accesses, scratchpad high water {} B\n",
             program.graph.name, result.total.dma_execs(), predicted, result.total.dma_bytes,
             result.total.scalar_mem_ops, result.total.ldm_high_water);

  if (!a.output.empty()) {
    std::vector<TensorDecl> outs;
    for (const auto& o : program.outputs) outs.push_back(program.memory.at(o).tensor);
    write_blob(a.output, to_records(outs, result.activations));
  }
  if (!a.arena_dump.empty()) {
    TensorMap<T> all = data;
    for (const auto& [name, values] : result.activations) all[name] = values;
    std::vector<TensorDecl> decls;
    for (const auto& alloc : program.memory.persistent) decls.push_back(alloc.tensor);
    write_blob(a.arena_dump, to_records(decls, all));
  }

  int status = kOk;
  if (a.check) {
    const auto want = run_reference<T>(program.graph, data);
    double worst = 0;
    std::string worst_layer;
    for (const auto& l : program.layers) {
      const double err = max_relative_error<T>(result.activations.at(l.name), want.at(l.name));
      if (err >= worst) worst = err, worst_layer = l.name;
    }
    report["check"] = {{"max_rel_error", worst}, {"layer", worst_layer}, {"tol", a.tol}, {"passed", worst <= a.tol}};
    fmt::print("check: max relative error {:.3g} ({}), tolerance {:.3g}: {}\n", worst, worst_layer, a.tol,
               worst <= a.tol ? "pass" : "FAIL");
    if (!(worst <= a.tol)) status = kVerification;
  }
  if (!a.stats.empty()) write_json(a.stats, report);
  return status;
}

// Diagnostics go to stderr so reports on stdout stay parseable.
void init_logging() {
  spdlog::set_default_logger(spdlog::stderr_color_mt("swsched"));
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("SWSCHED_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only accept real ones.
    if (level != spdlog::level::off || std::string_view(env) == "off") spdlog::set_level(level);
    else spdlog::warn("SWSCHED_LOG: unknown level '{}'", env);
  }
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"Ahead-of-time tensor compiler for scratchpad core groups"};
  app.require_subcommand(1);

  std::string workload, out_dir, layer_filter, json_out;
  MachineFlags machine;
  TraceFlags traces;

  auto* compile = app.add_subcommand("compile", "Emit C sources and plan.json");
  compile->add_option("workload", workload, "Workload file or bundled name")->required();
  compile->add_option("out_dir", out_dir, "Output directory")->required();
  machine.add(compile);
  traces.add(compile);

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Run the scheduled program on the simulated core group");
  simulate_cmd->add_option("workload", sim.workload, "Workload file or bundled name")->required();
  simulate_cmd->add_option("--params", sim.params, "Parameter blob");
  simulate_cmd->add_option("--input", sim.input, "Input blob");
  simulate_cmd->add_option("--output", sim.output, "Write graph outputs as a blob");
  simulate_cmd->add_option("--arena-dump", sim.arena_dump, "Write every persistent tensor as a blob");
  simulate_cmd->add_option("--stats", sim.stats, "Write statistics JSON");
  simulate_cmd->add_flag("--check", sim.check, "Compare with the direct reference evaluation");
  simulate_cmd->add_option("--tol", sim.tol, "Maximum relative error for --check")->capture_default_str();
  simulate_cmd->add_option("--seed", sim.seed, "Seed for tensors not read from blobs")->capture_default_str();
  simulate_cmd->add_flag("--zero-init", sim.zero_init, "Zeros for tensors not read from blobs");
  machine.add(simulate_cmd);

  auto* explain = app.add_subcommand("explain", "Show planner, loop order and DMA decisions");
  explain->add_option("workload", workload, "Workload file or bundled name")->required();
  explain->add_option("--layer", layer_filter, "Only this layer");
  explain->add_option("--json", json_out, "Also write the trace as JSON");
  machine.add(explain);
  traces.add(explain);

  std::string bundled_name;
  auto* show = app.add_subcommand("workload", "Print a bundled workload, or list them");
  show->add_option("name", bundled_name, "Bundled workload name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*compile) {
      const ProgramPlan program = plan_for(workload, machine);
      const SourceTree tree = emit_program(program);
      tree.write(out_dir);
      write_json(fs::path(out_dir) / "plan.json", plan_workload_json(program));
      fmt::print("{}: wrote {} files and plan.json to {}\n", program.graph.name, tree.manifest.size(), out_dir);
      if (traces.any()) print_explain(explain_json(program, traces, ""));
    } else if (*simulate_cmd) {
      const ProgramPlan program = plan_for(sim.workload, machine);
      return program.graph.elem == ElemKind::f32 ? simulate<float>(program, sim) : simulate<int32_t>(program, sim);
    } else if (*explain) {
      const ProgramPlan program = plan_for(workload, machine);
      if (!layer_filter.empty() && !program.graph.find(layer_filter))
        throw ParseError(fmt::format("--layer: no layer '{}'", layer_filter));
      const auto j = explain_json(program, traces, layer_filter);
      print_explain(j);
      if (!json_out.empty()) write_json(json_out, j);
    } else if (*show) {
      if (bundled_name.empty()) {
        for (const auto& n : bundled_workload_names()) fmt::print("{}\n", n);
      } else {
        fmt::print("{}\n", to_json(resolve_workload(bundled_name)).dump(2));
      }
    }
  } catch (const InfeasibleError& e) {
    fmt::print(std::cerr, "infeasible: {}\n", e.what());
    return kInfeasible;
  } catch (const SimulationError& e) {
    fmt::print(std::cerr, "simulation: {}\n", e.what());
    return kVerification;
  } catch (const std::exception& e) {
    fmt::print(std::cerr, "error: {}\n", e.what());
    return kUsage;
  }
  return kOk;
}
