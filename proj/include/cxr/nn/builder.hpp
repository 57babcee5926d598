#pragma once

#include <string>

#include "cxr/nn/graph.hpp"

namespace cxr::nn {

/// Appends nodes and their weight declarations to a ModelGraph. Each method
/// returns the new node id; parameterised nodes name their tensors
/// "<id>.weight", "<id>.bias", "<id>.running_mean", "<id>.running_var".
class GraphBuilder {
 public:
  GraphBuilder(std::string architecture, std::array<int, 3> input_shape);

  std::string conv(const std::string& id, const std::string& input, int in_c, int out_c, int kernel, int stride,
                   int padding, int groups = 1, bool bias = false);
  std::string batchnorm(const std::string& id, const std::string& input, int channels, double eps = 1e-5);
  std::string layernorm(const std::string& id, const std::string& input, int channels, double eps = 1e-6);
  std::string relu(const std::string& id, const std::string& input);
  std::string gelu(const std::string& id, const std::string& input);
  std::string maxpool(const std::string& id, const std::string& input, int kernel, int stride, int padding);
  std::string global_avg_pool(const std::string& id, const std::string& input);
  std::string linear(const std::string& id, const std::string& input, int in_features, int out_features,
                     bool bias = true);
  std::string softmax(const std::string& id, const std::string& input);
  std::string add(const std::string& id, const std::string& a, const std::string& b);

  /// Marks `output` as the graph output and returns the finished graph.
  ModelGraph finish(const std::string& output, std::vector<std::string> class_labels);

 private:
  std::string push(GraphNode node);
  void declare(const std::string& name, std::vector<std::int64_t> shape, WeightRole role);

  ModelGraph graph_;
};

}  // namespace cxr::nn
