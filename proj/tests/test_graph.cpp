#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "swsched/error.hpp"
#include "swsched/graph.hpp"
#include "swsched/program.hpp"
#include "swsched/workload.hpp"

using namespace swtest;

namespace {

Layer make(std::string name, LayerKind kind, std::vector<std::string> in, LayerAttrs a = {}) {
  return Layer{std::move(name), kind, std::move(in), a, {}};
}

LayerAttrs conv_attrs(int64_t filters, int64_t kernel, int64_t stride, int64_t pad, bool bias = true) {
  return LayerAttrs{.filters = filters, .kernel = kernel, .stride = stride, .pad = pad, .bias = bias, .relu = true};
}

template <class T>
double end_to_end_error(const LayerGraph& g, uint64_t seed = 7, const MachineConfig& m = {}) {
  const auto program = lower_graph(g, m);
  const auto data = seeded_data<T>(g, seed);
  const auto sim = simulate_program<T>(program, data);
  const auto ref = run_reference<T>(g, data);
  double worst = 0;
  for (const auto& [name, v] : ref) worst = std::max(worst, max_rel_error(sim.activations.at(name), v));
  return worst;
}

bool disjoint(const Allocation& a, const Allocation& b) {
  return a.offset + a.bytes <= b.offset || b.offset + b.bytes <= a.offset;
}

}  // namespace

TEST(Graph, TopoOrderPrefersEarlierDeclaredLayers) {
  LayerGraph g{"diamond", ElemKind::f32, {tensor("x", {8})}, {}};
  g.layers = {make("d", LayerKind::add, {"b", "c"}), make("c", LayerKind::relu, {"a"}),
              make("b", LayerKind::relu, {"a"}), make("a", LayerKind::relu, {"x"})};
  EXPECT_EQ(topo_schedule(g), (std::vector<int>{3, 1, 2, 0}));
  const auto p = lower_graph(g, MachineConfig{});
  EXPECT_EQ(p.outputs, std::vector<std::string>{"d"});
}

TEST(Graph, CyclesAndUnknownInputsAreRejected) {
  LayerGraph g{"cycle", ElemKind::f32, {tensor("x", {8})}, {}};
  g.layers = {make("a", LayerKind::add, {"x", "b"}), make("b", LayerKind::relu, {"a"})};
  EXPECT_THROW(topo_schedule(g), IrError);
  g.layers = {make("a", LayerKind::relu, {"y"})};
  EXPECT_THROW(topo_schedule(g), IrError);
}

TEST(Graph, ShapeErrorsAreRejected) {
  LayerGraph g{"bad", ElemKind::f32, {tensor("x", {3, 8, 8})}, {}};
  g.layers = {make("fc", LayerKind::dense, {"x"}, LayerAttrs{.units = 4})};
  EXPECT_THROW(infer_shapes(g), IrError);
  g.layers = {make("c", LayerKind::conv2d, {"x"}, conv_attrs(4, 9, 1, 0))};
  EXPECT_THROW(infer_shapes(g), IrError);
  g.layers = {make("x", LayerKind::relu, {"x"})};
  EXPECT_THROW(infer_shapes(g), IrError);
}

TEST(Graph, ProducersPrecedeConsumersOnRandomDags) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    LayerGraph g{"dag", ElemKind::f32, {tensor("x", {4})}, {}};
    const int n = 2 + static_cast<int>(rng() % 12);
    std::vector<std::string> names;
    for (int i = 0; i < n; ++i) names.push_back("l" + std::to_string(i));
    // Layer i consumes earlier-numbered layers; declare in shuffled order.
    std::vector<Layer> layers;
    for (int i = 0; i < n; ++i) {
      auto pick = [&] { return i == 0 ? std::string("x") : names[rng() % i]; };
      layers.push_back(rng() % 2 ? make(names[i], LayerKind::relu, {pick()})
                                 : make(names[i], LayerKind::add, {pick(), pick()}));
    }
    std::shuffle(layers.begin(), layers.end(), rng);
    g.layers = layers;
    const auto order = topo_schedule(g);
    std::map<std::string, size_t> pos;
    for (size_t k = 0; k < order.size(); ++k) pos[g.layers[order[k]].name] = k;
    for (const auto& l : g.layers)
      for (const auto& src : l.inputs)
        if (src != "x") {
          EXPECT_LT(pos.at(src), pos.at(l.name));
        }
  }
}

TEST(Graph, WorkspaceIsSharedAtTheLargestLayerNeed) {
  // Temps: a_padded 1x16x16 (1 KB), b_padded 4x16x16 (4 KB).
  LayerGraph g{"pads", ElemKind::f32, {tensor("x", {1, 14, 14})}, {}};
  g.layers = {make("a", LayerKind::conv2d, {"x"}, conv_attrs(4, 3, 1, 1)),
              make("b", LayerKind::conv2d, {"a"}, conv_attrs(4, 3, 1, 1))};
  const auto m = plan_memory(g);
  EXPECT_EQ(m.at("a_padded").bytes, 1024);
  EXPECT_EQ(m.at("b_padded").bytes, 4096);
  EXPECT_EQ(m.workspace_bytes, 4096);
  EXPECT_EQ(m.at("a_padded").offset, m.workspace_offset);
  EXPECT_EQ(m.at("b_padded").offset, m.workspace_offset);
  EXPECT_EQ(m.arena_bytes, m.workspace_offset + 4096);
  for (const auto& t : m.temps)
    for (const auto& p : m.persistent) EXPECT_TRUE(disjoint(t, p)) << t.tensor.name << " " << p.tensor.name;
  for (size_t i = 0; i < m.persistent.size(); ++i)
    for (size_t j = i + 1; j < m.persistent.size(); ++j) EXPECT_TRUE(disjoint(m.persistent[i], m.persistent[j]));
}

TEST(Graph, NoTemporariesMeansNoWorkspace) {
  const auto m = plan_memory(bundled_workload("chain2").graph);
  EXPECT_EQ(m.workspace_bytes, 0);
  EXPECT_TRUE(m.temps.empty());
  // x 256, fc1 128x256 + 128 + 128, fc2 10x128 + 10 + 10 elements.
  EXPECT_EQ(m.arena_bytes, 4 * (256 + 128 * 256 + 128 + 128 + 10 * 128 + 10 + 10));
}

TEST(Graph, EmptyGraphLowersToEmptyPlan) {
  const auto p = lower_graph(LayerGraph{"empty", ElemKind::f32, {}, {}}, MachineConfig{});
  EXPECT_TRUE(p.layers.empty());
  EXPECT_EQ(p.memory.arena_bytes, 0);
}

TEST(Graph, NetworkArenasMatchIndependentShapeWalk) {
  // Sum of inputs, parameters and activations plus the largest padded copy,
  // computed outside the compiler from the layer formulas.
  struct Case {
    const char* name;
    int64_t arena, workspace;
  };
  const Case cases[] = {{"alexnet", 253664556, 369024},
                        {"alexnet_small", 103053356, 46464},
                        {"vgg19", 654013504, 13075456},
                        {"vgg19_small", 177011520, 861184}};
  for (const auto& c : cases) {
    const auto m = plan_memory(bundled_workload(c.name).graph);
    EXPECT_EQ(m.arena_bytes, c.arena) << c.name;
    EXPECT_EQ(m.workspace_bytes, c.workspace) << c.name;
  }
}

TEST(Graph, FullNetworksLowerWithinTheScratchpad) {
  for (const char* name : {"alexnet", "vgg19"}) {
    const auto p = lower_graph(bundled_workload(name).graph, MachineConfig{});
    for (const auto& l : p.layers)
      for (const auto& op : l.ops) EXPECT_LE(op.sched.tile_bytes, 65536) << op.name;
  }
}

TEST(Graph, RecordsCoverEveryTensorAndPartition) {
  const auto p = lower_graph(bundled_workload("alexnet_small").graph, MachineConfig{});
  const auto& conv2 = p.layers[2];
  ASSERT_EQ(conv2.name, "conv2");
  EXPECT_EQ(conv2.ops.size(), 3u);
  EXPECT_EQ(conv2.tensors, (std::vector<std::string>{"conv2_padded", "pool1", "conv2", "conv2_w", "conv2_b"}));
  std::vector<std::string> fields;
  for (const auto& f : conv2.record) fields.push_back(f.name);
  EXPECT_EQ(fields[0], "conv2_padded_off");
  EXPECT_EQ(fields.size(), 5u + 2u * 3u);
  EXPECT_EQ(p.memory.at("conv2_padded").offset, conv2.record[0].value);
}

TEST(Reference, IdentityDenseCopiesItsInput) {
  LayerGraph g{"id", ElemKind::f32, {tensor("x", {16})}, {make("fc", LayerKind::dense, {"x"}, {.units = 16, .bias = true})}};
  auto data = zero_data<float>(g);
  for (int i = 0; i < 16; ++i) {
    data["x"][i] = static_cast<float>(i) - 7.5f;
    data["fc_w"][i * 16 + i] = 1;
  }
  EXPECT_EQ(run_reference<float>(g, data).at("fc"), data["x"]);
}

TEST(Reference, PointwiseConvEqualsDenseOverChannels) {
  LayerGraph conv{"pw", ElemKind::f32, {tensor("x", {6, 5, 5})}, {make("c", LayerKind::conv2d, {"x"}, conv_attrs(4, 1, 1, 0, false))}};
  conv.layers[0].attrs.relu = false;
  const auto data = seeded_data<float>(conv, 3);
  const auto out = run_reference<float>(conv, data).at("c");
  for (int p = 0; p < 25; ++p) {
    LayerGraph d{"d", ElemKind::f32, {tensor("v", {6})}, {make("fc", LayerKind::dense, {"v"}, {.units = 4})}};
    TensorMap<float> dd;
    dd["v"].resize(6);
    for (int c = 0; c < 6; ++c) dd["v"][c] = data.at("x")[c * 25 + p];
    dd["fc_w"] = data.at("c_w");
    const auto r = run_reference<float>(d, dd).at("fc");
    for (int f = 0; f < 4; ++f) EXPECT_FLOAT_EQ(out[f * 25 + p], r[f]);
  }
}

TEST(Reference, MaxPoolOfConstantIsConstant) {
  LayerGraph g{"mp", ElemKind::f32, {tensor("x", {3, 8, 8})}, {make("p", LayerKind::maxpool, {"x"}, {.kernel = 2, .stride = 2})}};
  TensorMap<float> data{{"x", std::vector<float>(192, 2.5f)}};
  EXPECT_EQ(run_reference<float>(g, data).at("p"), std::vector<float>(48, 2.5f));
}

TEST(EndToEnd, LargeDenseLowersToTheMatmulPipeline) {
  LayerGraph g{"fc", ElemKind::f32, {tensor("x", {9216})}, {make("fc6", LayerKind::dense, {"x"}, {.units = 4096, .bias = true, .relu = true})}};
  EXPECT_LE(end_to_end_error<float>(g), 1e-4);
}

TEST(EndToEnd, PaddedConvChainMatchesReference) {
  LayerGraph g{"convs", ElemKind::f32, {tensor("x", {3, 20, 20})}, {}};
  g.layers = {make("c1", LayerKind::conv2d, {"x"}, conv_attrs(16, 3, 1, 1)),
              make("p1", LayerKind::maxpool, {"c1"}, {.kernel = 2, .stride = 2}),
              make("c2", LayerKind::conv2d, {"p1"}, conv_attrs(8, 5, 2, 2)),
              make("r", LayerKind::relu, {"c2"}), make("s", LayerKind::add, {"r", "c2"}),
              make("f", LayerKind::flatten, {"s"}),
              make("fc", LayerKind::dense, {"f"}, {.units = 10, .bias = true})};
  EXPECT_LE(end_to_end_error<float>(g), 1e-4);
  g.elem = ElemKind::i32;
  for (auto& t : g.inputs) t.elem = ElemKind::i32;
  EXPECT_EQ(end_to_end_error<int32_t>(g), 0.0);
}

TEST(EndToEnd, SmallAlexNetMatchesReference) {
  EXPECT_LE(end_to_end_error<float>(bundled_workload("alexnet_small").graph), 1e-4);
}

TEST(EndToEnd, SmallVggMatchesReference) {
  EXPECT_LE(end_to_end_error<float>(bundled_workload("vgg19_small").graph), 1e-4);
}
