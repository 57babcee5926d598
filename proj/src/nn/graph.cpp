#include "cxr/nn/graph.hpp"

#include <unordered_set>

#include "cxr/error.hpp"

namespace cxr::nn {
namespace {

struct OpName {
  OpKind op;
  std::string_view name;
};

constexpr OpName kOpNames[] = {
    {OpKind::kConv2d, "conv2d"},       {OpKind::kBatchNorm, "batchnorm"},
    {OpKind::kLayerNorm, "layernorm"}, {OpKind::kRelu, "relu"},
    {OpKind::kGelu, "gelu"},           {OpKind::kMaxPool, "maxpool"},
    {OpKind::kGlobalAvgPool, "global_avg_pool"}, {OpKind::kLinear, "linear"},
    {OpKind::kSoftmax, "softmax"},     {OpKind::kAdd, "add"},
};

[[noreturn]] void fail(const GraphNode& node, const std::string& what) {
  throw ShapeError("node '" + node.id + "' (" + std::string(to_string(node.op)) + "): " + what);
}

const WeightDecl& decl(const ModelGraph& g, const GraphNode& node, std::size_t slot) {
  if (slot >= node.weight_refs.size()) fail(node, "missing weight reference #" + std::to_string(slot));
  const WeightDecl* d = g.find_weight(node.weight_refs[slot]);
  if (d == nullptr) throw MissingWeight("node '" + node.id + "' references undeclared tensor '" + node.weight_refs[slot] + "'");
  return *d;
}

void expect_vector(const GraphNode& node, const WeightDecl& d, int length) {
  if (d.shape.size() != 1 || d.shape[0] != length) {
    fail(node, "tensor '" + d.name + "' should have shape (" + std::to_string(length) + ")");
  }
}

}  // namespace

std::string_view to_string(OpKind op) {
  for (const auto& entry : kOpNames) {
    if (entry.op == op) return entry.name;
  }
  return "unknown";
}

OpKind parse_op_kind(std::string_view name) {
  if (name == "patchify_conv" || name == "patchify-conv") return OpKind::kConv2d;
  for (const auto& entry : kOpNames) {
    if (entry.name == name) return entry.op;
  }
  throw FormatError("unknown op kind '" + std::string(name) + "'");
}

const GraphNode* ModelGraph::find_node(std::string_view id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

std::optional<std::size_t> ModelGraph::node_index(std::string_view id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id == id) return i;
  }
  return std::nullopt;
}

const WeightDecl* ModelGraph::find_weight(std::string_view name) const {
  for (const auto& w : weights) {
    if (w.name == name) return &w;
  }
  return nullptr;
}

void ModelGraph::validate() const {
  std::unordered_set<std::string> seen;
  std::unordered_set<std::string> declared;
  for (const auto& w : weights) {
    if (!declared.insert(w.name).second) throw ShapeError("duplicate weight declaration '" + w.name + "'");
  }
  for (const auto& n : nodes) {
    if (n.id == kInputId) throw ShapeError("node id 'input' is reserved");
    for (const auto& in : n.inputs) {
      if (in != kInputId && !seen.contains(in)) {
        throw ShapeError("node '" + n.id + "' consumes '" + in + "' before it is defined");
      }
    }
    for (const auto& ref : n.weight_refs) {
      if (!declared.contains(ref)) throw MissingWeight("node '" + n.id + "' references undeclared tensor '" + ref + "'");
    }
    if (!seen.insert(n.id).second) throw ShapeError("duplicate node id '" + n.id + "'");
  }
  if (!seen.contains(output_node)) throw ShapeError("output node '" + output_node + "' not in graph");
}

std::map<std::string, Shape4> infer_shapes(const ModelGraph& g, int batch) {
  g.validate();
  std::map<std::string, Shape4> shapes;
  shapes[std::string(kInputId)] = {batch, g.input_shape[0], g.input_shape[1], g.input_shape[2]};
  for (const auto& node : g.nodes) {
    auto input = [&](std::size_t i) -> const Shape4& {
      if (i >= node.inputs.size()) fail(node, "missing input #" + std::to_string(i));
      return shapes.at(node.inputs[i]);
    };
    const Shape4& x = input(0);
    Shape4 out = x;
    const auto& a = node.attrs;
    switch (node.op) {
      case OpKind::kConv2d: {
        const WeightDecl& w = decl(g, node, 0);
        if (w.shape.size() != 4) fail(node, "conv weight must be 4-D");
        const int oc = static_cast<int>(w.shape[0]);
        const int icg = static_cast<int>(w.shape[1]);
        const int kh = static_cast<int>(w.shape[2]);
        const int kw = static_cast<int>(w.shape[3]);
        if (a.groups < 1 || x[1] != icg * a.groups || oc % a.groups != 0) {
          fail(node, "channel/group mismatch for input " + to_string(x));
        }
        if (node.weight_refs.size() > 1) expect_vector(node, decl(g, node, 1), oc);
        const int sh = x[2] + 2 * a.padding - kh;
        const int sw = x[3] + 2 * a.padding - kw;
        if (sh < 0 || sw < 0 || a.stride < 1) fail(node, "kernel does not fit input " + to_string(x));
        out = {x[0], oc, sh / a.stride + 1, sw / a.stride + 1};
        break;
      }
      case OpKind::kBatchNorm:
        for (std::size_t i = 0; i < 4; ++i) expect_vector(node, decl(g, node, i), x[1]);
        break;
      case OpKind::kLayerNorm:
        for (std::size_t i = 0; i < 2; ++i) expect_vector(node, decl(g, node, i), x[1]);
        break;
      case OpKind::kRelu:
      case OpKind::kGelu:
        break;
      case OpKind::kMaxPool: {
        const int sh = x[2] + 2 * a.padding - a.kernel;
        const int sw = x[3] + 2 * a.padding - a.kernel;
        if (sh < 0 || sw < 0 || a.stride < 1) fail(node, "window does not fit input " + to_string(x));
        out = {x[0], x[1], sh / a.stride + 1, sw / a.stride + 1};
        break;
      }
      case OpKind::kGlobalAvgPool:
        out = {x[0], x[1], 1, 1};
        break;
      case OpKind::kLinear: {
        const WeightDecl& w = decl(g, node, 0);
        const std::int64_t in = static_cast<std::int64_t>(x[1]) * x[2] * x[3];
        if (w.shape.size() != 2 || w.shape[1] != in) fail(node, "weight is not (out, " + std::to_string(in) + ")");
        if (node.weight_refs.size() > 1) expect_vector(node, decl(g, node, 1), static_cast<int>(w.shape[0]));
        out = {x[0], static_cast<int>(w.shape[0]), 1, 1};
        break;
      }
      case OpKind::kSoftmax:
        if (x[2] != 1 || x[3] != 1) fail(node, "softmax expects (N, C, 1, 1)");
        break;
      case OpKind::kAdd:
        if (input(1) != x) fail(node, "operand shapes differ " + to_string(x) + " vs " + to_string(input(1)));
        break;
    }
    shapes[node.id] = out;
  }
  return shapes;
}

std::int64_t count_params(const ModelGraph& g) {
  std::int64_t total = 0;
  for (const auto& w : g.weights) {
    if (w.trainable()) total += static_cast<std::int64_t>(w.size());
  }
  return total;
}

std::int64_t count_flops(const ModelGraph& g) {
  const auto shapes = infer_shapes(g, 1);
  std::int64_t total = 0;
  for (const auto& node : g.nodes) {
    const Shape4& out = shapes.at(node.id);
    const std::int64_t out_elems = static_cast<std::int64_t>(out[1]) * out[2] * out[3];
    switch (node.op) {
      case OpKind::kConv2d: {
        const WeightDecl* w = g.find_weight(node.weight_refs[0]);
        total += out_elems * w->shape[1] * w->shape[2] * w->shape[3];
        break;
      }
      case OpKind::kLinear: {
        const WeightDecl* w = g.find_weight(node.weight_refs[0]);
        total += w->shape[0] * w->shape[1];
        break;
      }
      default:
        total += out_elems;
        break;
    }
  }
  return total;
}

std::optional<std::string> gap_feature_node(const ModelGraph& g) {
  const GraphNode* head = g.find_node(g.output_node);
  if (head == nullptr || head->op != OpKind::kLinear || head->inputs.size() != 1) return std::nullopt;
  const GraphNode* pool = g.find_node(head->inputs[0]);
  if (pool == nullptr || pool->op != OpKind::kGlobalAvgPool || pool->inputs.size() != 1) return std::nullopt;
  return pool->inputs[0];
}

}  // namespace cxr::nn
