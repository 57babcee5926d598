#pragma once

#include <array>
#include <optional>

#include "cxr/augment/rng.hpp"
#include "cxr/imagecore/image.hpp"

namespace cxr::augment {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Interval&) const = default;
};

/// Training-time augmentation settings. Defaults follow the deployed recipe.
struct AugmentConfig {
  Interval crop_area_ratio{0.4, 0.8};    // area fraction of the source
  Interval aspect_ratio{3.0 / 4.0, 4.0 / 3.0};
  int out_size = 224;
  double perspective_distortion = 0.4;
  double perspective_prob = 0.6;
  Interval rotation_degrees{-45.0, 45.0};

  void validate() const;
};

// ---------------------------------------------------------------------------
// Random resized crop
//
// Draw order per attempt: area fraction, aspect ratio; if the box fits, top
// then left. Up to 10 attempts, then the largest centred square.

struct CropRect {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;
  bool fallback = false;
  bool operator==(const CropRect&) const = default;
};

CropRect sample_crop(int height, int width, const AugmentConfig& cfg, RngState& rng);

image::ImageTensor random_resized_crop(const image::ImageTensor& t, const AugmentConfig& cfg, RngState& rng);

// ---------------------------------------------------------------------------
// Projective warp

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Corners in order top-left, top-right, bottom-right, bottom-left.
using Quad = std::array<Point, 4>;

/// Row-major 3x3 with h[8] == 1.
using Homography = std::array<double, 9>;

/// 8-dof homography sending each `from` corner to the matching `to` corner.
/// Empty when the linear system is numerically singular.
std::optional<Homography> solve_homography(const Quad& from, const Quad& to);

Point apply_homography(const Homography& h, Point p);

/// Pixel-centre corners of a width x height image.
Quad image_corners(int height, int width);

/// Warps so the content at `original` corners lands on `displaced` corners:
/// out(p) = in(H(p)) with H mapping displaced -> original. Bilinear taps
/// outside the image read as 0. A singular system logs and returns the input.
image::ImageTensor warp_perspective(const image::ImageTensor& t, const Quad& original, const Quad& displaced);

struct PerspectiveSample {
  bool applied = false;
  Quad displaced{};
};

/// One gate draw; when it fires, eight inward displacements (dx, dy per corner,
/// TL, TR, BR, BL) bounded by distortion * width/2 and distortion * height/2.
PerspectiveSample sample_perspective(int height, int width, const AugmentConfig& cfg, RngState& rng);

image::ImageTensor random_perspective(const image::ImageTensor& t, const AugmentConfig& cfg, RngState& rng);

// ---------------------------------------------------------------------------
// Rotation

/// Counter-clockwise rotation about the image centre, same canvas, zero fill.
image::ImageTensor rotate(const image::ImageTensor& t, double degrees);

/// One draw from rotation_degrees, then rotate().
image::ImageTensor random_rotation(const image::ImageTensor& t, const AugmentConfig& cfg, RngState& rng);

// ---------------------------------------------------------------------------

/// CLAHE -> shorter side 256 -> random resized crop -> random perspective ->
/// random rotation -> min-max -> 3 channels -> normalise.
image::ImageTensor train_transform(const image::GrayImage& img, const image::ClaheParams& p,
                                   const image::NormalizationStats& s, const AugmentConfig& cfg, RngState& rng);

}  // namespace cxr::augment
