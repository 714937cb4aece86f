#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <random>

#include "support.hpp"
#include "swsched/error.hpp"
#include "swsched/ldm_planner.hpp"

using namespace swtest;

namespace {

BufferPlan plan_matmul(int64_t n, const MachineConfig& m = {}) {
  LoopNest nest(matmul(n, n, n));
  auto v = views(nest);
  auto pv = plan_vars(nest);
  return plan_ldm(pv, v, m);
}

std::vector<int64_t> usages(const BufferPlan& p, std::string_view decision) {
  std::vector<int64_t> out;
  for (const auto& c : p.trace)
    if (c.decision == decision) out.push_back(c.usage_bytes);
  return out;
}

}  // namespace

TEST(Planner, MatmulWalkthroughBuffers) {
  LoopNest nest(matmul(256, 256, 256));
  auto plan = plan_ldm(plan_vars(nest), views(nest), MachineConfig{});
  EXPECT_EQ(plan.at(nest.find("x")), 1);
  EXPECT_EQ(plan.at(nest.find("y")), 128);
  EXPECT_EQ(plan.at(nest.find("k")), 64);
  EXPECT_EQ(plan.usage_bytes, 33536);
  EXPECT_EQ(plan.capacity_bytes, 65536);
}

TEST(Planner, MatmulWalkthroughTrace) {
  const auto plan = plan_matmul(256);
  const auto init = usages(plan, "init");
  ASSERT_FALSE(init.empty());
  EXPECT_EQ(init.back(), 16896);
  EXPECT_EQ(usages(plan, "expand"), std::vector<int64_t>{33536});
  EXPECT_EQ(usages(plan, "reject"), std::vector<int64_t>{66560});
  EXPECT_EQ(plan.trace.back().var, "k");
  EXPECT_EQ(plan.trace.back().buffer, 128);
}

TEST(Planner, WalkthroughIsMaximal) {
  LoopNest nest(matmul(256, 256, 256));
  const auto v = views(nest);
  const auto plan = plan_ldm(plan_vars(nest), v, MachineConfig{});
  // x indexes no dimension below a frontier, so the planner never sizes it.
  for (VarId id : {nest.find("y"), nest.find("k")}) {
    BufferMap b = plan.buffer;
    if (b[id] == nest.var(id).extent) continue;
    b[id] = std::min(b[id] * 2, nest.var(id).extent);
    EXPECT_GT(ldm_usage(v, b), 65536) << nest.var(id).name;
  }
}

TEST(Planner, WalkthroughRunsFast) {
  const auto t0 = std::chrono::steady_clock::now();
  plan_matmul(256);
  EXPECT_LT(std::chrono::steady_clock::now() - t0, std::chrono::seconds(1));
}

TEST(Planner, VectorSaturatesAndBuffersWholeTensors) {
  LoopNest nest(vec(32));
  const auto v = views(nest);
  const auto plan = plan_ldm(plan_vars(nest), v, MachineConfig{});
  EXPECT_EQ(plan.at(nest.find("i")), 32);
  EXPECT_EQ(plan.usage_bytes, 384);
  for (int f : plan.frontiers) EXPECT_EQ(f, 1);
  bool saturated = false;
  for (const auto& c : plan.trace) saturated = saturated || c.decision == "saturate";
  EXPECT_TRUE(saturated);
  int64_t best = 0;
  for (int64_t b = 1; b <= 32; ++b)
    if (ldm_usage(v, BufferMap{{nest.find("i"), b}}) <= 65536) best = b;
  EXPECT_EQ(best, 32);
}

TEST(Planner, InfeasibleWhenMinimalTilesOverflow) {
  // Three f32 tiles of one element each need 12 bytes.
  LoopNest nest(vec(8));
  MachineConfig m;
  m.ldm_bytes = 8;
  EXPECT_THROW(plan_ldm(plan_vars(nest), views(nest), m), InfeasibleError);
  m.ldm_bytes = 16;
  const auto plan = plan_ldm(plan_vars(nest), views(nest), m);
  EXPECT_EQ(plan.at(nest.find("i")), 1);
  EXPECT_EQ(plan.usage_bytes, 12);
}

TEST(Planner, ShrinksWideSpanVarToOne) {
  // i + 4*j spans 5 elements once Buffer(j) = 2; only Buffer(j) = 1 fits.
  const VarId i{0}, j{1};
  TensorView t{"t", 4, {AffineIndex::of(i)}, {{i, j}}, false};
  t.indices[0].add(j, 4);
  std::vector<TensorView> ts{t, t, t};
  ts[1].name = "u";
  ts[2].name = "w";
  EXPECT_EQ(ldm_usage(ts, BufferMap{}), 12);
  EXPECT_EQ(ldm_usage(ts, BufferMap{{j, 2}}), 60);
  std::vector<PlanVar> vars{{i, "i", 4, false}, {j, "j", 2, false}};
  MachineConfig m;
  m.ldm_bytes = 16;
  const auto plan = plan_ldm(vars, ts, m);
  EXPECT_LE(plan.usage_bytes, 16);
  EXPECT_EQ(plan.at(j), 1);
}

TEST(Planner, DeterministicAcrossRuns) {
  const auto a = plan_matmul(256);
  const auto b = plan_matmul(256);
  EXPECT_EQ(a.buffer, b.buffer);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].var, b.trace[i].var);
    EXPECT_EQ(a.trace[i].usage_bytes, b.trace[i].usage_bytes);
  }
}

TEST(Planner, MonotoneInCapacityOnMatmulGrid) {
  for (int64_t n : {64, 128, 256, 512}) {
    LoopNest nest(matmul(n, n, n));
    BufferMap prev;
    for (int64_t cap : {4096, 8192, 16384, 32768, 65536, 131072}) {
      MachineConfig m;
      m.ldm_bytes = cap;
      const auto plan = plan_ldm(plan_vars(nest), views(nest), m);
      for (const auto& [v, b] : prev) EXPECT_GE(plan.at(v), b) << "n=" << n << " cap=" << cap;
      prev = plan.buffer;
    }
  }
}

TEST(Planner, ShrinkBacktracksToPreviousVar) {
  // Small capacity forces the init values to shrink below the chunk.
  LoopNest nest(matmul(256, 256, 256));
  MachineConfig m;
  m.ldm_bytes = 4096;
  const auto plan = plan_ldm(plan_vars(nest), views(nest), m);
  EXPECT_LE(plan.usage_bytes, 4096);
  bool shrank = false;
  for (const auto& c : plan.trace) shrank = shrank || c.decision == "shrink";
  EXPECT_TRUE(shrank);
}

TEST(Planner, RespectsCapacityOnRandomShapes) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int64_t> ext(1, 300);
  std::uniform_int_distribution<int64_t> cap(64, 70000);
  for (int trial = 0; trial < 200; ++trial) {
    LoopNest nest(matmul(ext(rng), ext(rng), ext(rng)));
    MachineConfig m;
    m.ldm_bytes = cap(rng);
    const auto v = views(nest);
    try {
      const auto plan = plan_ldm(plan_vars(nest), v, m);
      EXPECT_LE(plan.usage_bytes, m.ldm_bytes);
      EXPECT_EQ(plan.usage_bytes, ldm_usage(v, plan.buffer));
      for (VarId id : nest.order()) {
        EXPECT_GE(plan.at(id), 1);
        EXPECT_LE(plan.at(id), nest.var(id).extent);
      }
    } catch (const InfeasibleError&) {
      EXPECT_GT(ldm_usage(v, BufferMap{}), m.ldm_bytes);
    }
  }
}

TEST(Planner, PinnedVarsKeepUnitBuffer) {
  LoopNest nest(matmul(64, 64, 64));
  auto pv = plan_vars(nest);
  pv[0].pinned = true;  // x
  const auto plan = plan_ldm(pv, views(nest), MachineConfig{});
  EXPECT_EQ(plan.at(nest.find("x")), 1);
}

TEST(Planner, ClampsDoublingToRange) {
  LoopNest nest(vec(100));
  const auto plan = plan_ldm(plan_vars(nest), views(nest), MachineConfig{});
  EXPECT_EQ(plan.at(nest.find("i")), 100);
  for (const auto& c : plan.trace) EXPECT_LE(c.buffer, 100);
}

TEST(Planner, RejectsBadMachine) {
  LoopNest nest(vec(8));
  MachineConfig m;
  m.ldm_reserve = m.ldm_bytes;
  EXPECT_THROW(plan_ldm(plan_vars(nest), views(nest), m), Error);
  m = MachineConfig{};
  m.init_chunk = 0;
  EXPECT_THROW(plan_ldm(plan_vars(nest), views(nest), m), Error);
}

TEST(Planner, ReserveShrinksBudget) {
  LoopNest nest(matmul(256, 256, 256));
  MachineConfig m;
  m.ldm_reserve = 40000;
  const auto plan = plan_ldm(plan_vars(nest), views(nest), m);
  EXPECT_LE(plan.usage_bytes, 65536 - 40000);
  EXPECT_EQ(plan.capacity_bytes, 65536 - 40000);
}

TEST(Planner, TraceJsonShape) {
  const auto j = trace_to_json(plan_matmul(256));
  ASSERT_TRUE(j.is_array());
  for (const auto& c : j) {
    EXPECT_TRUE(c.contains("var"));
    EXPECT_TRUE(c.contains("Buffer"));
    EXPECT_TRUE(c.contains("usage_bytes"));
    EXPECT_TRUE(c.contains("decision"));
  }
}
