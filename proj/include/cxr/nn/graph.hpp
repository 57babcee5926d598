#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cxr/nn/tensor.hpp"

namespace cxr::nn {

enum class OpKind {
  kConv2d,
  kBatchNorm,
  kLayerNorm,
  kRelu,
  kGelu,
  kMaxPool,
  kGlobalAvgPool,
  kLinear,
  kSoftmax,
  kAdd,
};

std::string_view to_string(OpKind op);
/// Accepts "patchify_conv" as an alias of "conv2d".
OpKind parse_op_kind(std::string_view name);

struct NodeAttributes {
  int kernel = 1;  // maxpool window; conv kernels come from the weight shape
  int stride = 1;
  int padding = 0;
  int groups = 1;
  double eps = 0.0;
};

/// Graph input pseudo-node id.
inline constexpr std::string_view kInputId = "input";

struct GraphNode {
  std::string id;
  OpKind op = OpKind::kRelu;
  NodeAttributes attrs;
  std::vector<std::string> inputs;       // earlier node ids or kInputId
  std::vector<std::string> weight_refs;  // conv: weight[, bias]; bn: gamma, beta, mean, var;
                                         // ln: gamma, beta; linear: weight, bias
};

enum class WeightRole {
  kConvWeight,
  kLinearWeight,
  kBias,
  kNormScale,
  kNormShift,
  kRunningMean,
  kRunningVar,
};

/// Shape and role of one tensor the graph expects in its WeightStore.
struct WeightDecl {
  std::string name;
  std::vector<std::int64_t> shape;
  WeightRole role = WeightRole::kConvWeight;

  /// Running statistics are buffers, not parameters.
  bool trainable() const { return role != WeightRole::kRunningMean && role != WeightRole::kRunningVar; }
  std::size_t size() const { return element_count(shape); }
};

struct ModelGraph {
  std::string architecture;
  std::vector<GraphNode> nodes;  // topologically ordered
  std::array<int, 3> input_shape{3, 224, 224};
  std::string output_node;
  std::vector<std::string> class_labels;
  std::vector<WeightDecl> weights;

  const GraphNode* find_node(std::string_view id) const;
  std::optional<std::size_t> node_index(std::string_view id) const;
  const WeightDecl* find_weight(std::string_view name) const;

  /// Topological order, unique ids, resolvable weight refs, output present.
  void validate() const;
};

/// Output shape of every node for a batch of `batch` inputs. Throws ShapeError
/// naming the offending node.
std::map<std::string, Shape4> infer_shapes(const ModelGraph& g, int batch = 1);

/// Sum of trainable declared tensor sizes.
std::int64_t count_params(const ModelGraph& g);

/// Multiply-accumulate counted as one FLOP: conv = out_elems * (in_c / groups)
/// * kh * kw, linear = out * in, every other op one per output element.
std::int64_t count_flops(const ModelGraph& g);

/// Node id whose output feeds the graph's final global average pool, if the
/// graph ends global_avg_pool -> linear.
std::optional<std::string> gap_feature_node(const ModelGraph& g);

}  // namespace cxr::nn
