#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cxr/nn/graph.hpp"
#include "cxr/nn/weights.hpp"

namespace cxr::models {

/// Output order of every deployed head.
const std::vector<std::string>& default_class_labels();

/// "class_<i>" labels for heads that are not 4-way.
std::vector<std::string> generic_labels(int num_classes);

// Tensor names follow the torchvision state-dict layout where the op set
// allows it, so converted checkpoints need only a reshape of the ConvNeXt
// pointwise linears into 1x1 convolutions.

/// 7x7/2 stem, 3x3/2 max pool, four stages of two basic blocks (64, 128, 256,
/// 512), GAP, linear. Block outputs are named "layer<i>.<j>".
nn::ModelGraph build_resnet18(int num_classes);

/// 4x4/4 patchify stem + LN, stages (3, 3, 9, 3) x (96, 192, 384, 768) with
/// LN + 2x2/2 downsampling between them, head LN -> GAP -> linear.
nn::ModelGraph build_convnext_tiny(int num_classes);

/// Two-conv GAP-head network used as a fast fixture for service and CLI tests.
nn::ModelGraph build_tiny_cnn(int num_classes);

/// Known ids: "resnet18", "convnext_tiny", "tiny_cnn". Throws UnknownArchitecture.
nn::ModelGraph build_architecture(std::string_view id, int num_classes);
std::vector<std::string> known_architectures();

/// Swaps the final linear layer for a fresh `num_classes` head and relabels
/// the graph. Throws HeadError unless the graph ends in a linear node.
nn::ModelGraph replace_head(const nn::ModelGraph& g, int num_classes = 4);

/// Deterministic Gaussian weights for every declared tensor, drawn in
/// declaration order from one SplitMix64 stream (two draws per value,
/// Box-Muller cosine branch):
///   conv weight   z * sqrt(2 / fan_in)      linear weight  z * sqrt(1 / in)
///   bias          0.01 z                    norm scale     1 + 0.1 z
///   norm shift    0.1 z                     running mean   0.1 z
///   running var   1 + 0.1 |z|
nn::WeightStore random_weights(const nn::ModelGraph& g, std::uint64_t seed);

/// The graph and weights described by a store's own metadata.
nn::ModelGraph graph_for(const nn::WeightStore& w);

/// Layer explained by default: the tensor entering the final GAP.
std::string default_cam_layer(const nn::ModelGraph& g);

}  // namespace cxr::models
