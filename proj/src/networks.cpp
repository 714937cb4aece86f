// Built-in workloads: three single operators, a two-layer chain and the two
// convolutional networks, each also at a reduced input resolution.

#include <fmt/format.h>

#include "swsched/error.hpp"
#include "swsched/workload.hpp"

namespace swsched {

namespace {

TensorDecl input(std::string name, std::vector<int64_t> outer_first) {
  return TensorDecl{std::move(name), {outer_first.rbegin(), outer_first.rend()}, ElemKind::f32};
}

Layer layer(std::string name, LayerKind kind, std::string from, LayerAttrs a = {}) {
  return Layer{std::move(name), kind, {std::move(from)}, a, {}};
}

LayerAttrs conv(int64_t filters, int64_t kernel, int64_t stride, int64_t pad) {
  return LayerAttrs{.filters = filters, .kernel = kernel, .stride = stride, .pad = pad, .bias = true, .relu = true};
}

LayerAttrs pool(int64_t kernel, int64_t stride) { return LayerAttrs{.kernel = kernel, .stride = stride}; }

LayerAttrs dense(int64_t units, bool relu) { return LayerAttrs{.units = units, .bias = true, .relu = relu}; }

LayerGraph single(std::string name, std::vector<TensorDecl> in, Layer l) {
  l.inputs.clear();
  for (const auto& t : in) l.inputs.push_back(t.name);
  return LayerGraph{std::move(name), ElemKind::f32, std::move(in), {std::move(l)}};
}

// Classifier head shared by both networks.
void head(LayerGraph& g, std::string from) {
  g.layers.push_back(layer("flatten", LayerKind::flatten, std::move(from)));
  g.layers.push_back(layer("fc6", LayerKind::dense, "flatten", dense(4096, true)));
  g.layers.push_back(layer("fc7", LayerKind::dense, "fc6", dense(4096, true)));
  g.layers.push_back(layer("fc8", LayerKind::dense, "fc7", dense(1000, false)));
}

LayerGraph alexnet(std::string name, int64_t side) {
  LayerGraph g{std::move(name), ElemKind::f32, {input("image", {3, side, side})}, {}};
  auto& ls = g.layers;
  ls.push_back(layer("conv1", LayerKind::conv2d, "image", conv(96, 11, 4, 0)));
  ls.push_back(layer("pool1", LayerKind::maxpool, "conv1", pool(3, 2)));
  ls.push_back(layer("conv2", LayerKind::conv2d, "pool1", conv(256, 5, 1, 2)));
  ls.push_back(layer("pool2", LayerKind::maxpool, "conv2", pool(3, 2)));
  ls.push_back(layer("conv3", LayerKind::conv2d, "pool2", conv(384, 3, 1, 1)));
  ls.push_back(layer("conv4", LayerKind::conv2d, "conv3", conv(384, 3, 1, 1)));
  ls.push_back(layer("conv5", LayerKind::conv2d, "conv4", conv(256, 3, 1, 1)));
  ls.push_back(layer("pool5", LayerKind::maxpool, "conv5", pool(3, 2)));
  head(g, "pool5");
  return g;
}

LayerGraph vgg19(std::string name, int64_t side) {
  LayerGraph g{std::move(name), ElemKind::f32, {input("image", {3, side, side})}, {}};
  const int64_t widths[] = {64, 128, 256, 512, 512};
  const int depths[] = {2, 2, 4, 4, 4};
  std::string prev = "image";
  for (int b = 0; b < 5; ++b) {
    for (int c = 1; c <= depths[b]; ++c) {
      std::string id = fmt::format("conv{}_{}", b + 1, c);
      g.layers.push_back(layer(id, LayerKind::conv2d, prev, conv(widths[b], 3, 1, 1)));
      prev = std::move(id);
    }
    std::string id = fmt::format("pool{}", b + 1);
    g.layers.push_back(layer(id, LayerKind::maxpool, prev, pool(2, 2)));
    prev = std::move(id);
  }
  head(g, prev);
  return g;
}

LayerGraph chain2() {
  LayerGraph g{"chain2", ElemKind::f32, {input("x", {256})}, {}};
  g.layers.push_back(layer("fc1", LayerKind::dense, "x", dense(128, true)));
  g.layers.push_back(layer("fc2", LayerKind::dense, "fc1", dense(10, false)));
  return g;
}

}  // namespace

const std::vector<std::string>& bundled_workload_names() {
  static const std::vector<std::string> names{"matmul256", "conv_fig3", "vec1024",     "chain2",
                                              "alexnet",   "vgg19",     "alexnet_small", "vgg19_small"};
  return names;
}

Workload bundled_workload(std::string_view name) {
  LayerGraph g;
  if (name == "matmul256") {
    g = single("matmul256", {input("A", {256, 256}), input("B", {256, 256})}, layer("C", LayerKind::matmul, ""));
  } else if (name == "conv_fig3") {
    g = single("conv_fig3", {input("I", {16, 33, 33})},
               layer("conv", LayerKind::conv2d, "", LayerAttrs{.filters = 32, .kernel = 3, .stride = 2}));
  } else if (name == "vec1024") {
    g = single("vec1024", {input("v1", {1024}), input("v2", {1024})}, layer("v", LayerKind::vector_mul, ""));
  } else if (name == "chain2") {
    g = chain2();
  } else if (name == "alexnet") {
    g = alexnet("alexnet", 227);
  } else if (name == "alexnet_small") {
    g = alexnet("alexnet_small", 67);
  } else if (name == "vgg19") {
    g = vgg19("vgg19", 224);
  } else if (name == "vgg19_small") {
    g = vgg19("vgg19_small", 56);
  } else {
    throw ParseError(fmt::format("no bundled workload named '{}'", name));
  }
  return Workload{std::move(g), MachineConfig{}};
}

}  // namespace swsched
