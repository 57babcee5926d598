#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cxr/explain/cam.hpp"
#include "cxr/imagecore/image.hpp"
#include "cxr/imagecore/pipeline.hpp"
#include "cxr/nn/graph.hpp"
#include "cxr/nn/tensor.hpp"
#include "cxr/nn/weights.hpp"

namespace cxr::service {

/// An immutable model ready for concurrent inference.
struct LoadedModel {
  nn::ModelGraph graph;
  nn::WeightStore weights;
  std::string weight_file_digest;  // "sha256:<hex>" of the file bytes
  std::int64_t parameter_count = 0;
  std::int64_t flops = 0;
  std::string default_cam_layer;             // tensor entering the final GAP
  std::map<std::string, nn::Shape4> shapes;  // per node, batch 1
};

/// Reads, validates, and indexes a CXRW file. Propagates IoError,
/// FormatError, IntegrityError, UnknownArchitecture, MissingWeight, ShapeError.
std::shared_ptr<const LoadedModel> load_model(const std::filesystem::path& path);
std::shared_ptr<const LoadedModel> make_model(nn::WeightStore weights, std::span<const std::uint8_t> file_bytes);

std::string sha256_hex(std::span<const std::uint8_t> bytes);

struct PreprocessSettings {
  image::ClaheParams clahe;
  image::NormalizationStats stats;
  image::CropPolicy crop = image::CropPolicy::kCenter;
};

struct Classification {
  std::vector<double> probabilities;  // in class label order
  int predicted = 0;
  image::PreprocessGeometry geometry;
  nn::Tensor4 input;  // the (1, 3, 224, 224) model input
};

Classification classify(const LoadedModel& m, const image::GrayImage& img, const PreprocessSettings& settings);

struct ExplainOptions {
  explain::CamMethod method = explain::CamMethod::kGapHead;
  std::string layer;                 // empty: the tensor entering GAP
  std::optional<int> target_class;   // default: the predicted class
  std::optional<int> top_k;          // score_cam only
  double alpha = 0.5;                // overlay opacity
  int scorecam_batch = 16;
};

struct Explanation {
  Classification classification;
  std::string layer;
  int target_class = 0;
  explain::CamWeights weights;
  explain::Heatmap heatmap;  // at source resolution
  image::RgbImage overlay;   // at source resolution
};

/// Classification plus a CAM projected back onto the source image. Throws
/// LayerNotFound, HeadError (gap_head on a non-GAP layer), ConfigError,
/// IndexError for an out-of-range target.
Explanation explain_image(const LoadedModel& m, const image::GrayImage& img, const PreprocessSettings& settings,
                          const ExplainOptions& options);

}  // namespace cxr::service
