#pragma once

#include <filesystem>
#include <string_view>

#include "cxr/augment/augment.hpp"
#include "cxr/imagecore/image.hpp"
#include "cxr/service/server.hpp"

namespace cxr::cli {

/// Everything a TOML config file can set. Layering: built-in defaults, then
/// the file, then CXR_* environment variables (service keys), then flags.
struct CliConfig {
  image::ClaheParams clahe;
  image::NormalizationStats stats;
  augment::AugmentConfig augment;
  service::ServiceConfig service;

  /// Range checks for every section. Throws ConfigError.
  void validate() const;
};

// Recognised layout (all keys optional, unknown keys rejected):
//
//   [clahe]          clip_limit = 2.0, grid = [8, 8]
//   [normalization]  mean = [0.485, 0.456, 0.406], std = [0.229, 0.224, 0.225]
//   [augment]        crop_area_ratio = [0.4, 0.8], aspect_ratio = [0.75, 1.3333],
//                    out_size = 224, perspective_distortion = 0.4,
//                    perspective_prob = 0.6, rotation_degrees = [-45, 45]
//   [service]        model_path, host, port, max_body_mb, scorecam_batch,
//                    explain_concurrency, threads, cors_origin
CliConfig parse_config(std::string_view toml_text, CliConfig base = {});
CliConfig load_config(const std::filesystem::path& path, CliConfig base = {});

}  // namespace cxr::cli
