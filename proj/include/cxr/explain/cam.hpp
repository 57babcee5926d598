#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cxr/imagecore/image.hpp"
#include "cxr/imagecore/pipeline.hpp"
#include "cxr/nn/graph.hpp"
#include "cxr/nn/tensor.hpp"
#include "cxr/nn/weights.hpp"

namespace cxr::explain {

enum class CamMethod { kGapHead, kScoreCam };

std::string_view to_string(CamMethod m);
/// "gap_head" or "score_cam"; anything else throws UnsupportedMethod.
CamMethod parse_cam_method(std::string_view name);

/// One captured layer of a single image, split into N_l maps.
struct ActivationStack {
  std::string layer;
  int count = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;  // count * height * width, map-major

  /// Takes sample 0 of a captured (N, C, H, W) tensor.
  static ActivationStack from_tensor(std::string layer, const nn::Tensor4& t);
  std::span<const float> map(int k) const;
};

struct CamWeights {
  int target_class = 0;
  std::vector<double> alpha;
  CamMethod method = CamMethod::kGapHead;
};

/// Row-major real grid.
struct Grid {
  int height = 0;
  int width = 0;
  std::vector<double> values;
};

/// Values in [0, 1]; the maximum is 1 unless every value is 0.
struct Heatmap {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// ReLU(sum_k alpha_k A_k) at the stack's resolution. Throws ShapeError when
/// alpha and the stack disagree.
Grid cam_combine(const ActivationStack& stack, const CamWeights& w);

/// alpha_k = W[target, k] / (H * W) for the map entering the GAP -> linear
/// head. Throws HeadError for any other head and IndexError for a bad target.
CamWeights gap_head_weights(const nn::ModelGraph& g, const nn::WeightStore& w, int target_class);

struct ScoreCamOptions {
  std::optional<int> top_k;  // keep only the k maps with the largest maximum
  int batch_size = 16;       // masked inputs per forward pass
};

/// Score-CAM: each selected map is bilinearly upsampled to the input size,
/// min-max normalised, multiplied into the input, and scored by the softmax
/// probability of `target_class`. Constant maps and unselected maps get
/// alpha 0. `stack` must be the capture of `layer` for this input.
CamWeights score_cam_weights(const nn::ModelGraph& g, const nn::WeightStore& w, const nn::Tensor4& input,
                             const ActivationStack& stack, int target_class, const ScoreCamOptions& options = {});

/// Convenience overload that runs the capture itself. Throws LayerNotFound.
CamWeights score_cam_weights(const nn::ModelGraph& g, const nn::WeightStore& w, const nn::Tensor4& input,
                             const std::string& layer, int target_class, const ScoreCamOptions& options = {});

/// Map indices sorted by descending maximum activation, ties to the lower
/// index, truncated to k.
std::vector<int> top_k_maps(const ActivationStack& stack, int k);

/// Bilinear upsample (half-pixel centres) then divide by the maximum when it
/// is positive; all zeros otherwise.
Heatmap render_heatmap(const Grid& raw, int out_h, int out_w);

/// Maps a heatmap over the model input crop back onto the source image, with
/// zeros outside the crop, and renormalises to a unit maximum.
Heatmap project_to_source(const Heatmap& h, const image::PreprocessGeometry& geometry);

/// Piecewise-linear ramp blue -> cyan -> green -> yellow -> red at 0, 0.25,
/// 0.5, 0.75, 1. Unrounded channel values.
std::array<double, 3> colormap(double v);

/// (1 - alpha) * gray + alpha * colormap(h), rounded half-up per channel.
/// `img` is bilinearly resized to the heatmap when their sizes differ.
image::RgbImage overlay(const Heatmap& h, const image::GrayImage& img, double alpha);

/// 8-bit rendering, round(255 * h).
image::GrayImage heatmap_to_gray(const Heatmap& h);

}  // namespace cxr::explain
