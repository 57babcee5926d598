#pragma once

#include <vector>

#include "cxr/imagecore/image.hpp"

namespace cxr::image {

inline constexpr int kResizeShorterSide = 256;
inline constexpr int kModelInputSize = 224;

enum class CropPolicy {
  kCenter,      // centre crop to 224x224 (evaluation default)
  kFullResize,  // resize the whole 256-short-side image to 224x224
};

/// Intermediate tensors of the evaluation pipeline, in execution order.
enum class PreprocessStage {
  kDecoded = 0,
  kClahe = 1,
  kResized = 2,
  kCropped = 3,
  kScaled = 4,
  kReplicated = 5,
  kNormalized = 6,
};

/// Where the model input sits inside the source image.
struct PreprocessGeometry {
  int source_height = 0;
  int source_width = 0;
  int resized_height = 0;
  int resized_width = 0;
  int crop_top = 0;
  int crop_left = 0;
  int crop_size = kModelInputSize;
  CropPolicy policy = CropPolicy::kCenter;
};

struct PreprocessTrace {
  std::vector<ImageTensor> stages;  // indexed by PreprocessStage
  PreprocessGeometry geometry;
};

/// CLAHE -> shorter side 256 -> crop 224 -> min-max -> 3 channels -> normalise.
ImageTensor inference_preprocess(const GrayImage& img, const ClaheParams& p, const NormalizationStats& s,
                                 CropPolicy policy = CropPolicy::kCenter);

/// Same pipeline, keeping every stage output.
PreprocessTrace inference_preprocess_trace(const GrayImage& img, const ClaheParams& p, const NormalizationStats& s,
                                           CropPolicy policy = CropPolicy::kCenter);

}  // namespace cxr::image
