#include "cxr/explain/cam.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cxr/error.hpp"
#include "cxr/imagecore/transforms.hpp"
#include "cxr/nn/executor.hpp"

namespace cxr::explain {
namespace {

void check_target(const nn::ModelGraph& g, int target_class) {
  if (target_class < 0 || target_class >= static_cast<int>(g.class_labels.size())) {
    throw IndexError("target class " + std::to_string(target_class) + " out of range");
  }
}

struct RampPoint {
  double at;
  std::array<double, 3> rgb;
};

constexpr RampPoint kRamp[] = {
    {0.00, {0, 0, 255}}, {0.25, {0, 255, 255}}, {0.50, {0, 255, 0}}, {0.75, {255, 255, 0}}, {1.00, {255, 0, 0}},
};

}  // namespace

std::string_view to_string(CamMethod m) { return m == CamMethod::kGapHead ? "gap_head" : "score_cam"; }

CamMethod parse_cam_method(std::string_view name) {
  if (name == "gap_head") return CamMethod::kGapHead;
  if (name == "score_cam") return CamMethod::kScoreCam;
  throw UnsupportedMethod("unsupported CAM method '" + std::string(name) + "' (expected gap_head or score_cam)");
}

ActivationStack ActivationStack::from_tensor(std::string layer, const nn::Tensor4& t) {
  if (t.n() < 1 || t.c() < 1) throw ShapeError("activation tensor " + nn::to_string(t.dims) + " is empty");
  ActivationStack s;
  s.layer = std::move(layer);
  s.count = t.c();
  s.height = t.h();
  s.width = t.w();
  s.data.assign(t.data.begin(), t.data.begin() + static_cast<std::ptrdiff_t>(t.sample_size()));
  return s;
}

std::span<const float> ActivationStack::map(int k) const {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  return {data.data() + plane * k, plane};
}

Grid cam_combine(const ActivationStack& stack, const CamWeights& w) {
  if (static_cast<int>(w.alpha.size()) != stack.count) {
    throw ShapeError("cam_combine: " + std::to_string(w.alpha.size()) + " weights for " +
                     std::to_string(stack.count) + " maps");
  }
  Grid g{stack.height, stack.width, std::vector<double>(static_cast<std::size_t>(stack.height) * stack.width, 0.0)};
  for (int k = 0; k < stack.count; ++k) {
    const double a = w.alpha[k];
    if (a == 0.0) continue;
    const auto m = stack.map(k);
    for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] += a * m[i];
  }
  for (double& v : g.values) v = std::max(v, 0.0);
  return g;
}

CamWeights gap_head_weights(const nn::ModelGraph& g, const nn::WeightStore& w, int target_class) {
  const auto feature = nn::gap_feature_node(g);
  if (!feature) throw HeadError("gap_head weights need a GAP -> linear head");
  check_target(g, target_class);
  const auto shapes = nn::infer_shapes(g, 1);
  const nn::Shape4& fs = shapes.at(*feature);
  const nn::GraphNode* head = g.find_node(g.output_node);
  const nn::Parameter& weight = w.at(head->weight_refs.at(0));
  const int channels = fs[1];
  if (weight.shape.size() != 2 || weight.shape[1] != channels) throw ShapeError("head weight does not match features");
  const double area = static_cast<double>(fs[2]) * fs[3];
  CamWeights out{target_class, std::vector<double>(channels), CamMethod::kGapHead};
  for (int k = 0; k < channels; ++k) {
    out.alpha[k] = weight.values[static_cast<std::size_t>(target_class) * channels + k] / area;
  }
  return out;
}

std::vector<int> top_k_maps(const ActivationStack& stack, int k) {
  std::vector<float> peak(stack.count);
  for (int i = 0; i < stack.count; ++i) {
    const auto m = stack.map(i);
    peak[i] = *std::max_element(m.begin(), m.end());
  }
  std::vector<int> order(stack.count);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return peak[a] > peak[b]; });
  order.resize(static_cast<std::size_t>(std::clamp(k, 0, stack.count)));
  return order;
}

CamWeights score_cam_weights(const nn::ModelGraph& g, const nn::WeightStore& w, const nn::Tensor4& input,
                             const ActivationStack& stack, int target_class, const ScoreCamOptions& options) {
  check_target(g, target_class);
  if (input.n() != 1) throw ShapeError("score_cam expects a single input image");
  if (options.batch_size < 1) throw ConfigError("score_cam batch size must be at least 1");
  if (options.top_k && (*options.top_k < 1 || *options.top_k > stack.count)) {
    throw ConfigError("top_k must lie in [1, " + std::to_string(stack.count) + "]");
  }

  std::vector<int> selected;
  if (options.top_k) {
    selected = top_k_maps(stack, *options.top_k);
    std::sort(selected.begin(), selected.end());
  } else {
    selected.resize(stack.count);
    std::iota(selected.begin(), selected.end(), 0);
  }

  const int in_h = input.h();
  const int in_w = input.w();
  const std::size_t plane = static_cast<std::size_t>(in_h) * in_w;
  CamWeights out{target_class, std::vector<double>(stack.count, 0.0), CamMethod::kScoreCam};

  // Masks of the maps that survive the constant-map rule, in channel order.
  std::vector<int> channels;
  std::vector<std::vector<float>> masks;
  for (int k : selected) {
    const auto m = stack.map(k);
    const std::vector<double> src(m.begin(), m.end());
    const auto up = image::bilinear_resize(src, stack.height, stack.width, in_h, in_w);
    const auto [lo, hi] = std::minmax_element(up.begin(), up.end());
    const double range = *hi - *lo;
    if (!(range > 0.0)) continue;
    std::vector<float> mask(plane);
    for (std::size_t i = 0; i < plane; ++i) mask[i] = static_cast<float>((up[i] - *lo) / range);
    channels.push_back(k);
    masks.push_back(std::move(mask));
  }

  for (std::size_t start = 0; start < channels.size(); start += options.batch_size) {
    const std::size_t n = std::min<std::size_t>(options.batch_size, channels.size() - start);
    nn::Tensor4 batch({static_cast<int>(n), input.c(), in_h, in_w});
    for (std::size_t b = 0; b < n; ++b) {
      const auto& mask = masks[start + b];
      for (int c = 0; c < input.c(); ++c) {
        const float* src = input.plane(0, c);
        float* dst = batch.plane(static_cast<int>(b), c);
        for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] * mask[i];
      }
    }
    const auto probs = nn::softmax_rows(nn::graph_execute(g, w, batch).output);
    for (std::size_t b = 0; b < n; ++b) out.alpha[channels[start + b]] = probs[b].at(target_class);
  }
  return out;
}

CamWeights score_cam_weights(const nn::ModelGraph& g, const nn::WeightStore& w, const nn::Tensor4& input,
                             const std::string& layer, int target_class, const ScoreCamOptions& options) {
  auto run = nn::graph_execute(g, w, input, {layer});
  const auto stack = ActivationStack::from_tensor(layer, run.activations.at(layer));
  return score_cam_weights(g, w, input, stack, target_class, options);
}

Heatmap render_heatmap(const Grid& raw, int out_h, int out_w) {
  Heatmap h{out_h, out_w, image::bilinear_resize(raw.values, raw.height, raw.width, out_h, out_w)};
  const double peak = h.values.empty() ? 0.0 : *std::max_element(h.values.begin(), h.values.end());
  if (peak > 0.0) {
    for (double& v : h.values) v = std::max(v, 0.0) / peak;
  } else {
    std::fill(h.values.begin(), h.values.end(), 0.0);
  }
  return h;
}

Heatmap project_to_source(const Heatmap& h, const image::PreprocessGeometry& geo) {
  const int src_h = geo.source_height;
  const int src_w = geo.source_width;
  if (src_h < 1 || src_w < 1 || geo.resized_height < 1 || geo.resized_width < 1) {
    throw ShapeError("project_to_source: empty geometry");
  }
  // Crop box in resized coordinates.
  double box_top = 0.0;
  double box_left = 0.0;
  double box_h = geo.resized_height;
  double box_w = geo.resized_width;
  if (geo.policy == image::CropPolicy::kCenter) {
    box_top = geo.crop_top;
    box_left = geo.crop_left;
    box_h = box_w = geo.crop_size;
  }
  auto axis = [](int d, int src, int resized, double box_start, double box_len, int out) {
    const double r = (d + 0.5) * resized / src - 0.5;
    return (r - box_start + 0.5) * out / box_len - 0.5;
  };
  auto sample = [&](double y, double x) {
    if (y < -0.5 || x < -0.5 || y > h.height - 0.5 || x > h.width - 0.5) return 0.0;
    y = std::clamp(y, 0.0, h.height - 1.0);
    x = std::clamp(x, 0.0, h.width - 1.0);
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const int y1 = std::min(y0 + 1, h.height - 1);
    const int x1 = std::min(x0 + 1, h.width - 1);
    const double fy = y - y0;
    const double fx = x - x0;
    const double top = (1.0 - fx) * h.at(x0, y0) + fx * h.at(x1, y0);
    const double bottom = (1.0 - fx) * h.at(x0, y1) + fx * h.at(x1, y1);
    return (1.0 - fy) * top + fy * bottom;
  };

  std::vector<double> xs(src_w);
  for (int x = 0; x < src_w; ++x) xs[x] = axis(x, src_w, geo.resized_width, box_left, box_w, h.width);
  Grid g{src_h, src_w, std::vector<double>(static_cast<std::size_t>(src_h) * src_w)};
  for (int y = 0; y < src_h; ++y) {
    const double sy = axis(y, src_h, geo.resized_height, box_top, box_h, h.height);
    for (int x = 0; x < src_w; ++x) g.values[static_cast<std::size_t>(y) * src_w + x] = sample(sy, xs[x]);
  }
  return render_heatmap(g, src_h, src_w);
}

std::array<double, 3> colormap(double v) {
  v = std::clamp(v, 0.0, 1.0);
  for (std::size_t i = 1; i < std::size(kRamp); ++i) {
    if (v <= kRamp[i].at) {
      const double t = (v - kRamp[i - 1].at) / (kRamp[i].at - kRamp[i - 1].at);
      std::array<double, 3> rgb{};
      for (int c = 0; c < 3; ++c) rgb[c] = kRamp[i - 1].rgb[c] + t * (kRamp[i].rgb[c] - kRamp[i - 1].rgb[c]);
      return rgb;
    }
  }
  return kRamp[std::size(kRamp) - 1].rgb;
}

image::RgbImage overlay(const Heatmap& h, const image::GrayImage& img, double alpha) {
  alpha = std::clamp(alpha, 0.0, 1.0);
  image::GrayImage base = img;
  if (img.width != h.width || img.height != h.height) {
    base = image::to_gray(image::bilinear_resize(image::to_tensor(img), h.height, h.width));
  }
  image::RgbImage out{h.width, h.height, std::vector<std::uint8_t>(static_cast<std::size_t>(h.width) * h.height * 3)};
  for (std::size_t i = 0; i < h.values.size(); ++i) {
    const auto rgb = colormap(h.values[i]);
    for (int c = 0; c < 3; ++c) {
      out.pixels[3 * i + c] = image::to_u8((1.0 - alpha) * base.pixels[i] + alpha * rgb[c]);
    }
  }
  return out;
}

image::GrayImage heatmap_to_gray(const Heatmap& h) {
  image::GrayImage g(h.width, h.height);
  for (std::size_t i = 0; i < h.values.size(); ++i) g.pixels[i] = image::to_u8(255.0 * h.values[i]);
  return g;
}

}  // namespace cxr::explain
