#include "cxr/service/engine.hpp"

#include <openssl/evp.h>

#include <cstdio>

#include "cxr/error.hpp"
#include "cxr/evalmetrics/metrics.hpp"
#include "cxr/imagecore/codec.hpp"
#include "cxr/models/models.hpp"
#include "cxr/nn/executor.hpp"

namespace cxr::service {
namespace {

nn::Tensor4 batch_of_one(const image::ImageTensor& t) {
  return nn::Tensor4({1, t.channels, t.height, t.width}, t.data);
}

}  // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 digest failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::shared_ptr<const LoadedModel> make_model(nn::WeightStore weights, std::span<const std::uint8_t> file_bytes) {
  auto m = std::make_shared<LoadedModel>();
  m->graph = models::graph_for(weights);
  m->weights = std::move(weights);
  m->weight_file_digest = "sha256:" + sha256_hex(file_bytes);
  m->parameter_count = nn::count_params(m->graph, m->weights);
  m->flops = nn::count_flops(m->graph);
  m->default_cam_layer = models::default_cam_layer(m->graph);
  m->shapes = nn::infer_shapes(m->graph, 1);
  return m;
}

std::shared_ptr<const LoadedModel> load_model(const std::filesystem::path& path) {
  const auto bytes = image::read_file(path);
  return make_model(nn::parse_weights(bytes), bytes);
}

Classification classify(const LoadedModel& m, const image::GrayImage& img, const PreprocessSettings& settings) {
  auto trace = image::inference_preprocess_trace(img, settings.clahe, settings.stats, settings.crop);
  Classification c;
  c.geometry = trace.geometry;
  c.input = batch_of_one(trace.stages.back());
  const auto run = nn::graph_execute(m.graph, m.weights, c.input);
  c.probabilities = nn::softmax_rows(run.output).at(0);
  c.predicted = eval::argmax(c.probabilities);
  return c;
}

Explanation explain_image(const LoadedModel& m, const image::GrayImage& img, const PreprocessSettings& settings,
                          const ExplainOptions& options) {
  const std::string default_layer = models::default_cam_layer(m.graph);
  const std::string layer = options.layer.empty() ? default_layer : options.layer;
  if (!m.graph.find_node(layer)) throw LayerNotFound("no layer '" + layer + "' in " + m.graph.architecture);
  if (options.method == explain::CamMethod::kGapHead && layer != default_layer) {
    throw HeadError("gap_head weights exist only for the tensor entering GAP ('" + default_layer + "')");
  }
  if (options.alpha < 0.0 || options.alpha > 1.0) throw ConfigError("alpha must lie in [0, 1]");

  auto trace = image::inference_preprocess_trace(img, settings.clahe, settings.stats, settings.crop);
  Explanation e;
  Classification& c = e.classification;
  c.geometry = trace.geometry;
  c.input = batch_of_one(trace.stages.back());
  const auto run = nn::graph_execute(m.graph, m.weights, c.input, {layer});
  c.probabilities = nn::softmax_rows(run.output).at(0);
  c.predicted = eval::argmax(c.probabilities);

  e.layer = layer;
  e.target_class = options.target_class.value_or(c.predicted);
  if (e.target_class < 0 || e.target_class >= static_cast<int>(m.graph.class_labels.size())) {
    throw IndexError("target class out of range");
  }
  const auto stack = explain::ActivationStack::from_tensor(layer, run.activations.at(layer));
  if (options.method == explain::CamMethod::kGapHead) {
    e.weights = explain::gap_head_weights(m.graph, m.weights, e.target_class);
  } else {
    e.weights = explain::score_cam_weights(m.graph, m.weights, c.input, stack, e.target_class,
                                           {options.top_k, options.scorecam_batch});
  }
  const auto raw = explain::cam_combine(stack, e.weights);
  const auto model_heat = explain::render_heatmap(raw, c.input.h(), c.input.w());
  e.heatmap = explain::project_to_source(model_heat, c.geometry);
  e.overlay = explain::overlay(e.heatmap, img, options.alpha);
  return e;
}

}  // namespace cxr::service
