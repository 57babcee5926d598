#include "cxr/nn/builder.hpp"

#include "cxr/error.hpp"

namespace cxr::nn {

GraphBuilder::GraphBuilder(std::string architecture, std::array<int, 3> input_shape) {
  graph_.architecture = std::move(architecture);
  graph_.input_shape = input_shape;
}

std::string GraphBuilder::push(GraphNode node) {
  std::string id = node.id;
  graph_.nodes.push_back(std::move(node));
  return id;
}

void GraphBuilder::declare(const std::string& name, std::vector<std::int64_t> shape, WeightRole role) {
  graph_.weights.push_back({name, std::move(shape), role});
}

std::string GraphBuilder::conv(const std::string& id, const std::string& input, int in_c, int out_c, int kernel,
                               int stride, int padding, int groups, bool bias) {
  if (groups < 1 || in_c % groups != 0 || out_c % groups != 0) {
    throw ShapeError("conv '" + id + "': channels not divisible by groups");
  }
  GraphNode n{id, OpKind::kConv2d, {kernel, stride, padding, groups, 0.0}, {input}, {id + ".weight"}};
  declare(id + ".weight", {out_c, in_c / groups, kernel, kernel}, WeightRole::kConvWeight);
  if (bias) {
    n.weight_refs.push_back(id + ".bias");
    declare(id + ".bias", {out_c}, WeightRole::kBias);
  }
  return push(std::move(n));
}

std::string GraphBuilder::batchnorm(const std::string& id, const std::string& input, int channels, double eps) {
  GraphNode n{id, OpKind::kBatchNorm, {}, {input},
              {id + ".weight", id + ".bias", id + ".running_mean", id + ".running_var"}};
  n.attrs.eps = eps;
  declare(id + ".weight", {channels}, WeightRole::kNormScale);
  declare(id + ".bias", {channels}, WeightRole::kNormShift);
  declare(id + ".running_mean", {channels}, WeightRole::kRunningMean);
  declare(id + ".running_var", {channels}, WeightRole::kRunningVar);
  return push(std::move(n));
}

std::string GraphBuilder::layernorm(const std::string& id, const std::string& input, int channels, double eps) {
  GraphNode n{id, OpKind::kLayerNorm, {}, {input}, {id + ".weight", id + ".bias"}};
  n.attrs.eps = eps;
  declare(id + ".weight", {channels}, WeightRole::kNormScale);
  declare(id + ".bias", {channels}, WeightRole::kNormShift);
  return push(std::move(n));
}

std::string GraphBuilder::relu(const std::string& id, const std::string& input) {
  return push({id, OpKind::kRelu, {}, {input}, {}});
}

std::string GraphBuilder::gelu(const std::string& id, const std::string& input) {
  return push({id, OpKind::kGelu, {}, {input}, {}});
}

std::string GraphBuilder::maxpool(const std::string& id, const std::string& input, int kernel, int stride,
                                  int padding) {
  return push({id, OpKind::kMaxPool, {kernel, stride, padding, 1, 0.0}, {input}, {}});
}

std::string GraphBuilder::global_avg_pool(const std::string& id, const std::string& input) {
  return push({id, OpKind::kGlobalAvgPool, {}, {input}, {}});
}

std::string GraphBuilder::linear(const std::string& id, const std::string& input, int in_features, int out_features,
                                 bool bias) {
  GraphNode n{id, OpKind::kLinear, {}, {input}, {id + ".weight"}};
  declare(id + ".weight", {out_features, in_features}, WeightRole::kLinearWeight);
  if (bias) {
    n.weight_refs.push_back(id + ".bias");
    declare(id + ".bias", {out_features}, WeightRole::kBias);
  }
  return push(std::move(n));
}

std::string GraphBuilder::softmax(const std::string& id, const std::string& input) {
  return push({id, OpKind::kSoftmax, {}, {input}, {}});
}

std::string GraphBuilder::add(const std::string& id, const std::string& a, const std::string& b) {
  return push({id, OpKind::kAdd, {}, {a, b}, {}});
}

ModelGraph GraphBuilder::finish(const std::string& output, std::vector<std::string> class_labels) {
  graph_.output_node = output;
  graph_.class_labels = std::move(class_labels);
  graph_.validate();
  return std::move(graph_);
}

}  // namespace cxr::nn
