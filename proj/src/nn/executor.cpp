#include "cxr/nn/executor.hpp"

#include <cassert>
#include <unordered_map>

#include "cxr/error.hpp"
#include "cxr/nn/ops.hpp"

namespace cxr::nn {
namespace {

std::span<const float> tensor(const WeightStore& w, const GraphNode& node, std::size_t slot) {
  if (slot >= node.weight_refs.size()) return {};
  return w.at(node.weight_refs[slot]).values;
}

Tensor4 softmax_channels(const Tensor4& x) {
  if (x.h() != 1 || x.w() != 1) throw ShapeError("softmax expects (N, C, 1, 1), got " + to_string(x.dims));
  Tensor4 out(x.dims);
  for (int n = 0; n < x.n(); ++n) {
    const auto p = softmax(std::span<const float>(x.data.data() + static_cast<std::size_t>(n) * x.c(), x.c()));
    for (int c = 0; c < x.c(); ++c) out.data[static_cast<std::size_t>(n) * x.c() + c] = static_cast<float>(p[c]);
  }
  return out;
}

Tensor4 run_node(const GraphNode& node, const WeightStore& w, const std::vector<const Tensor4*>& in) {
  const Tensor4& x = *in[0];
  const auto& a = node.attrs;
  switch (node.op) {
    case OpKind::kConv2d: {
      const Parameter& k = w.at(node.weight_refs[0]);
      if (k.shape.size() != 4) throw ShapeError("conv weight must be 4-D");
      const ConvWeights cw{k.values, static_cast<int>(k.shape[0]), static_cast<int>(k.shape[1]),
                           static_cast<int>(k.shape[2]), static_cast<int>(k.shape[3])};
      return conv2d(x, cw, tensor(w, node, 1), {a.stride, a.padding, a.groups});
    }
    case OpKind::kBatchNorm:
      return batchnorm(x, tensor(w, node, 0), tensor(w, node, 1), tensor(w, node, 2), tensor(w, node, 3), a.eps);
    case OpKind::kLayerNorm:
      return layernorm(x, tensor(w, node, 0), tensor(w, node, 1), a.eps);
    case OpKind::kRelu:
      return relu(x);
    case OpKind::kGelu:
      return gelu(x);
    case OpKind::kMaxPool:
      return maxpool(x, a.kernel, a.stride, a.padding);
    case OpKind::kGlobalAvgPool:
      return global_avg_pool(x);
    case OpKind::kLinear: {
      const Parameter& m = w.at(node.weight_refs[0]);
      if (m.shape.size() != 2) throw ShapeError("linear weight must be 2-D");
      return linear(x, m.values, static_cast<int>(m.shape[0]), tensor(w, node, 1));
    }
    case OpKind::kSoftmax:
      return softmax_channels(x);
    case OpKind::kAdd:
      if (in.size() < 2) throw ShapeError("add needs two inputs");
      return add(x, *in[1]);
  }
  throw ShapeError("unhandled op");
}

}  // namespace

ExecutionResult graph_execute(const ModelGraph& g, const WeightStore& w, const Tensor4& x,
                              const std::set<std::string>& capture,
                              const std::map<std::string, Tensor4>& overrides) {
  for (const auto& id : capture) {
    if (!g.node_index(id)) throw LayerNotFound("no node '" + id + "' to capture");
  }
  for (const auto& [id, t] : overrides) {
    if (!g.node_index(id)) throw LayerNotFound("no node '" + id + "' to override");
  }
  if (x.n() < 1 || x.c() != g.input_shape[0] || x.h() != g.input_shape[1] || x.w() != g.input_shape[2]) {
    throw ShapeError("input " + to_string(x.dims) + " does not match the graph input (N, " +
                     std::to_string(g.input_shape[0]) + ", " + std::to_string(g.input_shape[1]) + ", " +
                     std::to_string(g.input_shape[2]) + ")");
  }
  const auto out_index = g.node_index(g.output_node);
  if (!out_index) throw ShapeError("output node '" + g.output_node + "' not in graph");

  // Backward liveness pass: which nodes must run, and the last consumer of each.
  const std::size_t count = g.nodes.size();
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < count; ++i) index.emplace(g.nodes[i].id, i);
  std::vector<bool> needed(count, false);
  needed[*out_index] = true;
  for (const auto& id : capture) needed[index.at(id)] = true;
  std::unordered_map<std::string, std::size_t> last_use;
  for (std::size_t i = count; i-- > 0;) {
    const GraphNode& node = g.nodes[i];
    if (!needed[i] || overrides.contains(node.id)) continue;
    for (const auto& in : node.inputs) {
      last_use.try_emplace(in, i);
      if (in != kInputId) needed[index.at(in)] = true;
    }
  }

  std::unordered_map<std::string, Tensor4> live;
  ExecutionResult result;
  for (std::size_t i = 0; i < count; ++i) {
    if (!needed[i]) continue;
    const GraphNode& node = g.nodes[i];
    Tensor4 out;
    if (const auto it = overrides.find(node.id); it != overrides.end()) {
      out = it->second;
    } else {
      std::vector<const Tensor4*> inputs;
      for (const auto& in : node.inputs) {
        if (in == kInputId) {
          inputs.push_back(&x);
        } else {
          inputs.push_back(&live.at(in));
        }
      }
      if (inputs.empty()) throw ShapeError("node '" + node.id + "' has no inputs");
      try {
        out = run_node(node, w, inputs);
      } catch (const ShapeError& e) {
        throw ShapeError("node '" + node.id + "' (" + std::string(to_string(node.op)) + "): " + e.what());
      }
      assert(out.all_finite() && "operator produced a non-finite value");
      for (const auto& in : node.inputs) {
        if (in != kInputId && last_use.at(in) == i && in != node.id) live.erase(in);
      }
    }
    if (capture.contains(node.id)) result.activations.emplace(node.id, out);
    if (i == *out_index) result.output = out;
    if (last_use.contains(node.id)) live.emplace(node.id, std::move(out));
  }
  return result;
}

std::vector<std::vector<double>> softmax_rows(const Tensor4& logits) {
  std::vector<std::vector<double>> rows;
  const std::size_t width = logits.sample_size();
  for (int n = 0; n < logits.n(); ++n) {
    rows.push_back(softmax(std::span<const float>(logits.data.data() + n * width, width)));
  }
  return rows;
}

}  // namespace cxr::nn
