#include "cxr/models/models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cxr/augment/rng.hpp"
#include "cxr/error.hpp"
#include "cxr/nn/builder.hpp"

namespace cxr::models {
namespace {

using nn::GraphBuilder;

void check_classes(int num_classes) {
  if (num_classes < 1) throw HeadError("num_classes must be at least 1");
}

std::vector<std::string> labels_for(int num_classes) {
  return num_classes == 4 ? default_class_labels() : generic_labels(num_classes);
}

std::string basic_block(GraphBuilder& b, const std::string& name, const std::string& input, int in_c, int out_c,
                        int stride) {
  std::string x = b.conv(name + ".conv1", input, in_c, out_c, 3, stride, 1);
  x = b.batchnorm(name + ".bn1", x, out_c);
  x = b.relu(name + ".relu1", x);
  x = b.conv(name + ".conv2", x, out_c, out_c, 3, 1, 1);
  x = b.batchnorm(name + ".bn2", x, out_c);
  std::string shortcut = input;
  if (stride != 1 || in_c != out_c) {
    shortcut = b.conv(name + ".downsample.0", input, in_c, out_c, 1, stride, 0);
    shortcut = b.batchnorm(name + ".downsample.1", shortcut, out_c);
  }
  x = b.add(name + ".add", x, shortcut);
  return b.relu(name, x);
}

std::string convnext_block(GraphBuilder& b, const std::string& name, const std::string& input, int dim) {
  std::string x = b.conv(name + ".block.0", input, dim, dim, 7, 1, 3, dim, true);
  x = b.layernorm(name + ".block.2", x, dim);
  x = b.conv(name + ".block.3", x, dim, 4 * dim, 1, 1, 0, 1, true);
  x = b.gelu(name + ".block.4", x);
  x = b.conv(name + ".block.5", x, 4 * dim, dim, 1, 1, 0, 1, true);
  return b.add(name, x, input);
}

double gaussian(augment::RngState& rng) {
  const double u1 = rng.next_unit();
  const double u2 = rng.next_unit();
  return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

const std::vector<std::string>& default_class_labels() {
  static const std::vector<std::string> labels{"normal", "bacteria", "virus", "mycoplasma"};
  return labels;
}

std::vector<std::string> generic_labels(int num_classes) {
  std::vector<std::string> labels;
  for (int i = 0; i < num_classes; ++i) labels.push_back("class_" + std::to_string(i));
  return labels;
}

nn::ModelGraph build_resnet18(int num_classes) {
  check_classes(num_classes);
  GraphBuilder b("resnet18", {3, 224, 224});
  std::string x = b.conv("conv1", std::string(nn::kInputId), 3, 64, 7, 2, 3);
  x = b.batchnorm("bn1", x, 64);
  x = b.relu("relu", x);
  x = b.maxpool("maxpool", x, 3, 2, 1);
  const int widths[] = {64, 128, 256, 512};
  int in_c = 64;
  for (int layer = 0; layer < 4; ++layer) {
    const int out_c = widths[layer];
    for (int block = 0; block < 2; ++block) {
      const int stride = (layer > 0 && block == 0) ? 2 : 1;
      const std::string name = "layer" + std::to_string(layer + 1) + "." + std::to_string(block);
      x = basic_block(b, name, x, in_c, out_c, stride);
      in_c = out_c;
    }
  }
  x = b.global_avg_pool("avgpool", x);
  x = b.linear("fc", x, 512, num_classes);
  return b.finish(x, labels_for(num_classes));
}

nn::ModelGraph build_convnext_tiny(int num_classes) {
  check_classes(num_classes);
  GraphBuilder b("convnext_tiny", {3, 224, 224});
  const int depths[] = {3, 3, 9, 3};
  const int dims[] = {96, 192, 384, 768};
  std::string x = b.conv("features.0.0", std::string(nn::kInputId), 3, dims[0], 4, 4, 0, 1, true);
  x = b.layernorm("features.0.1", x, dims[0]);
  for (int stage = 0; stage < 4; ++stage) {
    if (stage > 0) {
      const std::string down = "features." + std::to_string(2 * stage);
      x = b.layernorm(down + ".0", x, dims[stage - 1]);
      x = b.conv(down + ".1", x, dims[stage - 1], dims[stage], 2, 2, 0, 1, true);
    }
    const std::string prefix = "features." + std::to_string(2 * stage + 1) + ".";
    for (int block = 0; block < depths[stage]; ++block) {
      x = convnext_block(b, prefix + std::to_string(block), x, dims[stage]);
    }
  }
  x = b.layernorm("classifier.0", x, dims[3]);
  x = b.global_avg_pool("avgpool", x);
  x = b.linear("classifier.2", x, dims[3], num_classes);
  return b.finish(x, labels_for(num_classes));
}

nn::ModelGraph build_tiny_cnn(int num_classes) {
  check_classes(num_classes);
  GraphBuilder b("tiny_cnn", {3, 224, 224});
  std::string x = b.conv("conv1", std::string(nn::kInputId), 3, 8, 3, 4, 1);
  x = b.batchnorm("bn1", x, 8);
  x = b.relu("relu1", x);
  x = b.conv("conv2", x, 8, 16, 3, 2, 1, 1, true);
  x = b.relu("features", x);
  x = b.global_avg_pool("avgpool", x);
  x = b.linear("fc", x, 16, num_classes);
  return b.finish(x, labels_for(num_classes));
}

nn::ModelGraph build_architecture(std::string_view id, int num_classes) {
  if (id == "resnet18") return build_resnet18(num_classes);
  if (id == "convnext_tiny") return build_convnext_tiny(num_classes);
  if (id == "tiny_cnn") return build_tiny_cnn(num_classes);
  throw UnknownArchitecture("unknown architecture '" + std::string(id) + "'");
}

std::vector<std::string> known_architectures() { return {"resnet18", "convnext_tiny", "tiny_cnn"}; }

nn::ModelGraph replace_head(const nn::ModelGraph& g, int num_classes) {
  check_classes(num_classes);
  const nn::GraphNode* head = g.find_node(g.output_node);
  if (head == nullptr || head->op != nn::OpKind::kLinear || g.nodes.empty() || g.nodes.back().id != head->id) {
    throw HeadError("graph does not end in a linear node");
  }
  const nn::WeightDecl* old_weight = g.find_weight(head->weight_refs.at(0));
  const std::int64_t in_features = old_weight->shape.at(1);
  const bool has_bias = head->weight_refs.size() > 1;

  nn::ModelGraph out = g;
  const std::vector<std::string> old_refs = head->weight_refs;
  std::erase_if(out.weights, [&](const nn::WeightDecl& d) {
    return std::find(old_refs.begin(), old_refs.end(), d.name) != old_refs.end();
  });
  nn::GraphNode& node = out.nodes.back();
  node.weight_refs = {node.id + ".weight"};
  out.weights.push_back({node.id + ".weight", {num_classes, in_features}, nn::WeightRole::kLinearWeight});
  if (has_bias) {
    node.weight_refs.push_back(node.id + ".bias");
    out.weights.push_back({node.id + ".bias", {num_classes}, nn::WeightRole::kBias});
  }
  out.class_labels = labels_for(num_classes);
  out.validate();
  return out;
}

nn::WeightStore random_weights(const nn::ModelGraph& g, std::uint64_t seed) {
  augment::RngState rng(seed);
  nn::WeightStore store;
  store.architecture = g.architecture;
  store.class_labels = g.class_labels;
  for (const auto& d : g.weights) {
    nn::Parameter p;
    p.shape = d.shape;
    p.values.resize(d.size());
    double fan_in = 1.0;
    for (std::size_t i = 1; i < d.shape.size(); ++i) fan_in *= static_cast<double>(d.shape[i]);
    for (float& v : p.values) {
      const double z = gaussian(rng);
      double value = 0.0;
      switch (d.role) {
        case nn::WeightRole::kConvWeight: value = z * std::sqrt(2.0 / fan_in); break;
        case nn::WeightRole::kLinearWeight: value = z * std::sqrt(1.0 / fan_in); break;
        case nn::WeightRole::kBias: value = 0.01 * z; break;
        case nn::WeightRole::kNormScale: value = 1.0 + 0.1 * z; break;
        case nn::WeightRole::kNormShift: value = 0.1 * z; break;
        case nn::WeightRole::kRunningMean: value = 0.1 * z; break;
        case nn::WeightRole::kRunningVar: value = 1.0 + 0.1 * std::fabs(z); break;
      }
      v = static_cast<float>(value);
    }
    store.add(d.name, std::move(p));
  }
  return store;
}

nn::ModelGraph graph_for(const nn::WeightStore& w) {
  if (w.class_labels.empty()) throw HeadError("weight file declares no class labels");
  nn::ModelGraph g = build_architecture(w.architecture, static_cast<int>(w.class_labels.size()));
  g.class_labels = w.class_labels;
  nn::validate_weights(g, w);
  return g;
}

std::string default_cam_layer(const nn::ModelGraph& g) {
  if (auto node = nn::gap_feature_node(g)) return *node;
  throw HeadError("graph has no GAP -> linear head to locate a default CAM layer");
}

}  // namespace cxr::models
