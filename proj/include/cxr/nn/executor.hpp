#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "cxr/nn/graph.hpp"
#include "cxr/nn/tensor.hpp"
#include "cxr/nn/weights.hpp"

namespace cxr::nn {

struct ExecutionResult {
  Tensor4 output;                               // value of g.output_node
  std::map<std::string, Tensor4> activations;  // copies of the captured nodes
};

/// Runs the graph on a batch. `capture` names nodes whose outputs are copied
/// into the result; `overrides` substitutes a node's output with the given
/// tensor, so nodes feeding only overridden values are skipped.
///
/// Throws LayerNotFound for unknown capture/override ids, MissingWeight, and
/// ShapeError naming the node that rejected its operands.
ExecutionResult graph_execute(const ModelGraph& g, const WeightStore& w, const Tensor4& x,
                              const std::set<std::string>& capture = {},
                              const std::map<std::string, Tensor4>& overrides = {});

/// Row-wise softmax over an (N, C, 1, 1) logit tensor.
std::vector<std::vector<double>> softmax_rows(const Tensor4& logits);

}  // namespace cxr::nn
