#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <fmt/format.h>

#include "support.hpp"
#include "swsched/params_blob.hpp"
#include "swsched/program.hpp"
#include "swsched/workload.hpp"

using namespace swsched;
using namespace swtest;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int status = -1;
  std::string out, err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           fmt::format("swsched_cli_{}_{}", ::testing::UnitTest::GetInstance()->current_test_info()->name(), ::getpid());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  CliRun run(const std::string& args) const {
    const std::string cmd = fmt::format("cd {} && {} {} > stdout.txt 2> stderr.txt", dir_.string(), SWSCHED_CLI, args);
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(path("stdout.txt")), slurp(path("stderr.txt"))};
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }
  json read_json(const std::string& name) const {
    std::ifstream in(path(name));
    return json::parse(in);
  }

  fs::path dir_;
};

std::string workload_file(const std::string& name) {
  return (fs::path(SWSCHED_WORKLOAD_DIR) / (name + ".json")).string();
}

// DMA executions per PE of an outer order under the documented cost model,
// recomputed here: a tensor's transfer sits after its last dependent loop and
// runs once per iteration of the loops up to there; an output enclosed by a
// reduction loop also pays a get per visit.
struct OracleTensor {
  std::set<std::string> deps;
  bool output = false;
};
int64_t oracle_cost(const std::vector<std::string>& order, const std::map<std::string, int64_t>& extent,
                    const std::set<std::string>& reductions, const std::vector<OracleTensor>& tensors) {
  int64_t total = 0;
  for (const auto& t : tensors) {
    size_t level = 0;
    for (size_t i = 0; i < order.size(); ++i)
      if (t.deps.count(order[i])) level = i + 1;
    int64_t visits = 1;
    bool reduced = false;
    for (size_t i = 0; i < level; ++i) {
      visits *= extent.at(order[i]);
      reduced = reduced || reductions.count(order[i]);
    }
    total += (t.output && reduced) ? 2 * visits : visits;
  }
  return total;
}

}  // namespace

TEST_F(Cli, CompileWritesSourcesAndPlan) {
  const auto r = run("compile " + workload_file("matmul256") + " out");
  ASSERT_EQ(r.status, 0) << r.err;
  std::set<std::string> files;
  for (const auto& e : fs::directory_iterator(path("out"))) files.insert(e.path().filename().string());
  EXPECT_EQ(files, (std::set<std::string>{"main.c", "C.h", "C.c", "C.slave.c", "C_para.h", "plan.json"}));
  const json plan = read_json("out/plan.json");
  EXPECT_EQ(plan["plan"]["predicted_dma_execs"], 4608);
  EXPECT_EQ(plan["layers"][0]["schedule"]["buffer"], json::parse(R"({"x.l": 1, "y": 128, "k": 64})"));
}

TEST_F(Cli, BundledNamesResolveWithoutFiles) {
  EXPECT_EQ(run("compile vec1024.json out").status, 0);
  EXPECT_EQ(run("compile vec1024 out2").status, 0);
  const auto r = run("compile nothing_like_this out3");
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.err.find("no such file or bundled workload"), std::string::npos);
}

TEST_F(Cli, SmallerScratchpadGivesSmallerFeasibleTiles) {
  ASSERT_EQ(run("compile --ldm-bytes 16384 matmul256.json out").status, 0);
  const auto w = load_workload(path("out/plan.json"));
  EXPECT_EQ(w.machine.ldm_bytes, 16384);
  // Independent rerun of the planner with the same capacity.
  MachineConfig m;
  m.ldm_bytes = 16384;
  const auto fresh = schedule_nest(swtest::matmul(256, 256, 256), m);
  EXPECT_EQ(to_json(w.graph.layers[0].schedule), to_json(overrides_of(fresh)));
  EXPECT_LE(fresh.tile_bytes, 16384);
  int64_t big = 1, smaller = 1;
  for (const auto& [name, b] : overrides_of(schedule_nest(swtest::matmul(256, 256, 256), MachineConfig{})).buffer) big *= b;
  for (const auto& [name, b] : w.graph.layers[0].schedule.buffer) smaller *= b;
  EXPECT_LT(smaller, big);
}

TEST_F(Cli, MalformedJsonExitsWithLocation) {
  std::ofstream(path("bad.json")) << "{\n  \"name\": \"m\",\n  \"layers\": [,]\n}\n";
  const auto r = run("compile bad.json out");
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.err.find("bad.json:3:14"), std::string::npos) << r.err;

  json j = to_json(bundled_workload("matmul256"));
  j["layers"][0]["extra"] = 1;
  std::ofstream(path("extra.json")) << j.dump();
  const auto r2 = run("simulate extra.json");
  EXPECT_EQ(r2.status, 1);
  EXPECT_NE(r2.err.find("/layers/0"), std::string::npos) << r2.err;
}

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run("").status, 1);
  EXPECT_EQ(run("compile").status, 1);
  EXPECT_EQ(run("simulate matmul256 --tol").status, 1);
  EXPECT_EQ(run("--help").status, 0);
}

TEST_F(Cli, InfeasiblePlanExitsTwo) {
  const auto r = run("compile --ldm-bytes 8 matmul256 out");
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("infeasible"), std::string::npos);
  EXPECT_EQ(run("simulate --ldm-bytes 8 alexnet_small").status, 2);
}

TEST_F(Cli, SimulatedCountsEqualThePlannedPrediction) {
  ASSERT_EQ(run("compile matmul256.json out").status, 0);
  ASSERT_EQ(run("simulate matmul256.json --stats s.json").status, 0);
  const json s = read_json("s.json");
  EXPECT_EQ(s["total"]["dma_execs"], read_json("out/plan.json")["plan"]["predicted_dma_execs"]);
  EXPECT_EQ(s["total"]["dma_execs"], 4608);
  EXPECT_EQ(s["predicted_dma_execs"], 4608);
}

TEST_F(Cli, CompiledPlanReproducesDirectStats) {
  for (const char* name : {"chain2", "conv_fig3", "alexnet_small"}) {
    ASSERT_EQ(run(fmt::format("compile {} out --num-pes 16 --ldm-bytes 32768", name)).status, 0);
    ASSERT_EQ(run("simulate out/plan.json --stats replay.json").status, 0);
    ASSERT_EQ(run(fmt::format("simulate {} --num-pes 16 --ldm-bytes 32768 --stats direct.json", name)).status, 0);
    const json a = read_json("replay.json"), b = read_json("direct.json");
    EXPECT_EQ(a["total"], b["total"]) << name;
    EXPECT_EQ(a["layers"], b["layers"]) << name;
  }
}

TEST_F(Cli, CheckPassesOnAlexNet) {
  const auto r = run("simulate " + workload_file("alexnet") + " --check --seed 7 --stats s.json");
  ASSERT_EQ(r.status, 0) << r.out << r.err;
  const json s = read_json("s.json");
  EXPECT_LE(s["check"]["max_rel_error"].get<double>(), 1e-4);
  EXPECT_TRUE(s["check"]["passed"].get<bool>());
}

TEST_F(Cli, VerificationFailureExitsThree) {
  // No error satisfies a negative tolerance.
  const auto r = run("simulate chain2 --check --tol -1");
  EXPECT_EQ(r.status, 3);
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);
}

TEST_F(Cli, MissingBlobNeedsZeroInit) {
  EXPECT_EQ(run("simulate matmul256 --input missing.bin").status, 1);
  ASSERT_EQ(run("simulate matmul256 --input missing.bin --zero-init --output out.bin").status, 0);
  const auto records = read_blob(path("out.bin"));
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].name, "C");
  EXPECT_EQ(records[0].payload.size(), 256u * 256u * 4u);
  EXPECT_TRUE(std::all_of(records[0].payload.begin(), records[0].payload.end(), [](unsigned char b) { return b == 0; }));
}

TEST_F(Cli, BlobsFeedTheSimulation) {
  const auto program = lower_graph(bundled_workload("chain2").graph, MachineConfig{});
  const auto data = seeded_data<float>(program.graph, 3);
  write_blob(path("p.bin"), to_records(program.params(), data));
  write_blob(path("i.bin"), to_records(program.graph.inputs, data));
  ASSERT_EQ(run("simulate chain2 --params p.bin --input i.bin --output a.bin --arena-dump arena.bin").status, 0);
  ASSERT_EQ(run("simulate chain2 --seed 3 --output b.bin").status, 0);
  EXPECT_EQ(slurp(path("a.bin")), slurp(path("b.bin")));
  const auto want = run_reference<float>(program.graph, data);
  const auto got = from_records<float>({program.memory.at("fc2").tensor}, read_blob(path("a.bin")));
  EXPECT_LE(max_rel_error(got.at("fc2"), want.at("fc2")), 1e-4);
  std::set<std::string> dumped;
  for (const auto& r : read_blob(path("arena.bin"))) dumped.insert(r.name);
  EXPECT_EQ(dumped, (std::set<std::string>{"x", "fc1_w", "fc1_b", "fc1", "fc2_w", "fc2_b", "fc2"}));
}

TEST_F(Cli, ExplainTracesThePlannerWalkthrough) {
  const auto r = run("explain matmul256 --trace --json t.json");
  ASSERT_EQ(r.status, 0) << r.err;
  const auto planner = r.out.find("planner");
  const auto a = r.out.find(" 16896 B", planner), b = r.out.find(" 33536 B", planner), c = r.out.find(" 66560 B", planner);
  ASSERT_NE(c, std::string::npos) << r.out;
  EXPECT_LT(a, b);
  EXPECT_LT(b, c);
  EXPECT_NE(r.out.rfind("reject", c), std::string::npos);
  EXPECT_EQ(r.out.find("permutation"), std::string::npos);

  std::vector<std::pair<std::string, int64_t>> steps;
  const json trace = read_json("t.json")[0]["planner"]["trace"];
  for (const auto& cp : trace)
    steps.emplace_back(cp["decision"].get<std::string>(), cp["usage_bytes"].get<int64_t>());
  EXPECT_NE(std::find(steps.begin(), steps.end(), std::pair<std::string, int64_t>{"init", 16896}), steps.end());
  EXPECT_NE(std::find(steps.begin(), steps.end(), std::pair<std::string, int64_t>{"expand", 33536}), steps.end());
  EXPECT_EQ(steps.back(), (std::pair<std::string, int64_t>{"reject", 66560}));
}

TEST_F(Cli, ExplainShowsASinglePreambleTransferForVectors) {
  ASSERT_EQ(run("explain vec1024 --dump-dma --json d.json").status, 0);
  const json dma = read_json("d.json")[0]["dma"];
  ASSERT_EQ(dma.size(), 3u);
  for (const auto& d : dma) {
    EXPECT_EQ(d["level"], 0);
    EXPECT_EQ(d["count"], 1);
  }
  EXPECT_EQ(read_json("d.json")[0]["predicted_dma_execs"], 3 * 64);
}

TEST_F(Cli, ExplainOrderListsEveryPermutation) {
  ASSERT_EQ(run("explain matmul256 --explain-order --json o.json").status, 0);
  const json e = read_json("o.json")[0];
  // Per PE: 256 / 64 rows, y in tiles of 128, k in tiles of 64.
  const std::map<std::string, int64_t> extent{{"x.l", 4}, {"yo", 2}, {"ko", 4}};
  const std::vector<OracleTensor> tensors{{{"x.l", "yo"}, true}, {{"x.l", "ko"}, false}, {{"yo", "ko"}, false}};
  std::vector<std::string> order{"x.l", "yo", "ko"};
  std::sort(order.begin(), order.end());
  std::map<std::vector<std::string>, int64_t> want;
  do want[order] = oracle_cost(order, extent, {"ko"}, tensors);
  while (std::next_permutation(order.begin(), order.end()));

  std::map<std::vector<std::string>, int64_t> got;
  for (const auto& p : e["permutations"]) got[p["order"].get<std::vector<std::string>>()] = p["total_dma_execs"];
  EXPECT_EQ(got, want);
  int64_t best = INT64_MAX;
  for (const auto& [o, c] : want) best = std::min(best, c);
  EXPECT_EQ(e["order"]["total_dma_execs"], best);
  EXPECT_EQ(e["order"]["order"], json::parse(R"(["x.l", "yo", "ko"])"));
}

TEST_F(Cli, WorkloadCommandPrintsTheBundledFiles) {
  const auto list = run("workload");
  ASSERT_EQ(list.status, 0);
  for (const auto& n : bundled_workload_names()) {
    EXPECT_NE(list.out.find(n + "\n"), std::string::npos);
    const auto r = run("workload " + n);
    ASSERT_EQ(r.status, 0);
    EXPECT_EQ(json::parse(r.out), json::parse(slurp(workload_file(n)))) << n;
  }
}

TEST_F(Cli, LogLevelComesFromTheEnvironment) {
  const auto with_log = [&](const std::string& level) {
    const std::string cmd = fmt::format("cd {} && SWSCHED_LOG={} {} simulate chain2 > /dev/null 2> err.txt",
                                        dir_.string(), level, SWSCHED_CLI);
    EXPECT_EQ(std::system(cmd.c_str()), 0);
    return slurp(path("err.txt"));
  };
  const std::string info = with_log("info");
  EXPECT_NE(info.find("fc1: "), std::string::npos) << info;
  EXPECT_NE(info.find("fc2: "), std::string::npos);
  EXPECT_EQ(with_log("warn"), "");
  EXPECT_EQ(with_log("off"), "");
  EXPECT_NE(with_log("chatty").find("unknown level"), std::string::npos);
}
