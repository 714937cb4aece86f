// Direct evaluation of a layer graph. Row-major storage, outermost index
// first; sums run in the element type (int64 for integers) in canonical
// index order, as a naive implementation would write them.

#include <algorithm>
#include <limits>

#include "swsched/program.hpp"

namespace swsched {

namespace {

template <class T>
using Acc = std::conditional_t<std::is_floating_point_v<T>, T, int64_t>;

// Outer-first extents of a decl.
std::vector<int64_t> dims(const TensorDecl& t) { return {t.shape.rbegin(), t.shape.rend()}; }

template <class T>
T finish(Acc<T> v, const T* bias, int64_t o, bool relu) {
  if (bias) v += static_cast<Acc<T>>(bias[o]);
  if (relu && v < 0) v = 0;
  return static_cast<T>(v);
}

template <class T>
void conv(const std::vector<T>& in, const TensorDecl& in_d, const std::vector<T>& w, const T* bias,
          const LayerAttrs& a, const TensorDecl& out_d, std::vector<T>& out) {
  const auto id = dims(in_d), od = dims(out_d);
  const int64_t C = id[0], H = id[1], W = id[2], F = od[0], OH = od[1], OW = od[2], K = a.kernel;
  for (int64_t f = 0; f < F; ++f)
    for (int64_t y = 0; y < OH; ++y)
      for (int64_t x = 0; x < OW; ++x) {
        Acc<T> s = 0;
        for (int64_t c = 0; c < C; ++c)
          for (int64_t ky = 0; ky < K; ++ky)
            for (int64_t kx = 0; kx < K; ++kx) {
              const int64_t iy = y * a.stride + ky - a.pad, ix = x * a.stride + kx - a.pad;
              if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
              s += static_cast<Acc<T>>(in[(c * H + iy) * W + ix]) *
                   static_cast<Acc<T>>(w[((f * C + c) * K + ky) * K + kx]);
            }
        out[(f * OH + y) * OW + x] = finish<T>(s, bias, f, a.relu);
      }
}

template <class T>
void maxpool(const std::vector<T>& in, const TensorDecl& in_d, const LayerAttrs& a, const TensorDecl& out_d,
             std::vector<T>& out) {
  const auto id = dims(in_d), od = dims(out_d);
  const int64_t H = id[1], W = id[2], C = od[0], OH = od[1], OW = od[2];
  for (int64_t c = 0; c < C; ++c)
    for (int64_t y = 0; y < OH; ++y)
      for (int64_t x = 0; x < OW; ++x) {
        T m = in[(c * H + y * a.stride) * W + x * a.stride];
        for (int64_t ky = 0; ky < a.kernel; ++ky)
          for (int64_t kx = 0; kx < a.kernel; ++kx)
            m = std::max(m, in[(c * H + y * a.stride + ky) * W + x * a.stride + kx]);
        out[(c * OH + y) * OW + x] = m;
      }
}

}  // namespace

template <class T>
TensorMap<T> run_reference(const LayerGraph& graph, const TensorMap<T>& data) {
  const auto shapes = infer_shapes(graph);
  std::map<std::string, TensorDecl, std::less<>> decls;
  for (const auto& t : graph.inputs) decls.emplace(t.name, t);
  for (const auto& [name, lt] : shapes) decls.emplace(name, lt.output);

  TensorMap<T> act;
  auto value = [&](const std::string& name) -> const std::vector<T>& {
    if (auto it = act.find(name); it != act.end()) return it->second;
    return data.at(name);
  };
  for (int i : topo_schedule(graph)) {
    const Layer& l = graph.layers[i];
    const LayerTensors& lt = shapes.at(l.name);
    const auto& x = value(l.inputs[0]);
    const TensorDecl& xd = decls.at(l.inputs[0]);
    std::vector<T> out(static_cast<size_t>(lt.output.num_elems()));
    const T* bias = l.attrs.bias ? data.at(lt.params.back().name).data() : nullptr;
    switch (l.kind) {
      case LayerKind::conv2d: conv(x, xd, data.at(lt.params[0].name), bias, l.attrs, lt.output, out); break;
      case LayerKind::dense: {
        const auto& w = data.at(lt.params[0].name);
        const int64_t N = xd.num_elems(), U = lt.output.num_elems();
        for (int64_t o = 0; o < U; ++o) {
          Acc<T> s = 0;
          for (int64_t k = 0; k < N; ++k) s += static_cast<Acc<T>>(x[k]) * static_cast<Acc<T>>(w[o * N + k]);
          out[o] = finish<T>(s, bias, o, l.attrs.relu);
        }
        break;
      }
      case LayerKind::maxpool: maxpool(x, xd, l.attrs, lt.output, out); break;
      case LayerKind::flatten: out = x; break;
      case LayerKind::relu:
        std::transform(x.begin(), x.end(), out.begin(), [](T v) { return v < T(0) ? T(0) : v; });
        break;
      case LayerKind::add:
      case LayerKind::vector_mul: {
        const auto& y = value(l.inputs[1]);
        for (size_t k = 0; k < out.size(); ++k) out[k] = l.kind == LayerKind::add ? x[k] + y[k] : x[k] * y[k];
        break;
      }
      case LayerKind::matmul: {
        const auto& b = value(l.inputs[1]);
        const auto ad = dims(xd), od = dims(lt.output);
        const int64_t X = ad[0], K = ad[1], Y = od[1];
        for (int64_t r = 0; r < X; ++r)
          for (int64_t c = 0; c < Y; ++c) {
            Acc<T> s = 0;
            for (int64_t k = 0; k < K; ++k)
              s += static_cast<Acc<T>>(x[r * K + k]) * static_cast<Acc<T>>(b[k * Y + c]);
            out[r * Y + c] = static_cast<T>(s);
          }
        break;
      }
    }
    act.emplace(l.name, std::move(out));
  }
  return act;
}

template TensorMap<float> run_reference<float>(const LayerGraph&, const TensorMap<float>&);
template TensorMap<int32_t> run_reference<int32_t>(const LayerGraph&, const TensorMap<int32_t>&);

}  // namespace swsched
