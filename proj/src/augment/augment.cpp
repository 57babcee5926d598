#include "cxr/augment/augment.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>

#include "cxr/error.hpp"
#include "cxr/imagecore/clahe.hpp"
#include "cxr/imagecore/pipeline.hpp"
#include "cxr/imagecore/transforms.hpp"

namespace cxr::augment {

using image::ImageTensor;

namespace {

constexpr int kCropAttempts = 10;

// Bilinear sample; taps outside the plane read as zero.
double sample_zero_fill(std::span<const float> plane, int h, int w, double sx, double sy) {
  if (!(sx > -1.0 && sx < w && sy > -1.0 && sy < h)) return 0.0;
  const double fx0 = std::floor(sx);
  const double fy0 = std::floor(sy);
  const int x0 = static_cast<int>(fx0);
  const int y0 = static_cast<int>(fy0);
  const double fx = sx - fx0;
  const double fy = sy - fy0;
  auto tap = [&](int x, int y) -> double {
    return (x >= 0 && x < w && y >= 0 && y < h) ? plane[static_cast<std::size_t>(y) * w + x] : 0.0;
  };
  const double top = (1.0 - fx) * tap(x0, y0) + fx * tap(x0 + 1, y0);
  const double bottom = (1.0 - fx) * tap(x0, y0 + 1) + fx * tap(x0 + 1, y0 + 1);
  return (1.0 - fy) * top + fy * bottom;
}

template <typename Map>
ImageTensor inverse_warp(const ImageTensor& t, Map&& to_source) {
  ImageTensor out(t.channels, t.height, t.width);
  for (int y = 0; y < t.height; ++y) {
    for (int x = 0; x < t.width; ++x) {
      const Point s = to_source(Point{static_cast<double>(x), static_cast<double>(y)});
      for (int c = 0; c < t.channels; ++c) {
        out.at(c, y, x) = static_cast<float>(sample_zero_fill(t.plane(c), t.height, t.width, s.x, s.y));
      }
    }
  }
  return out;
}

void check_interval(const Interval& i, const char* name) {
  if (!(i.lo <= i.hi) || !std::isfinite(i.lo) || !std::isfinite(i.hi)) {
    throw ConfigError(std::string(name) + ": interval must satisfy lo <= hi");
  }
}

}  // namespace

void AugmentConfig::validate() const {
  check_interval(crop_area_ratio, "crop_area_ratio");
  if (!(crop_area_ratio.lo > 0.0) || crop_area_ratio.hi > 1.0) {
    throw ConfigError("crop_area_ratio must lie in (0, 1]");
  }
  check_interval(aspect_ratio, "aspect_ratio");
  if (!(aspect_ratio.lo > 0.0)) throw ConfigError("aspect_ratio must be positive");
  if (out_size < 1) throw ConfigError("out_size must be >= 1");
  if (!(perspective_distortion >= 0.0 && perspective_distortion <= 1.0)) {
    throw ConfigError("perspective_distortion must lie in [0, 1]");
  }
  if (!(perspective_prob >= 0.0 && perspective_prob <= 1.0)) throw ConfigError("perspective_prob must lie in [0, 1]");
  check_interval(rotation_degrees, "rotation_degrees");
}

CropRect sample_crop(int height, int width, const AugmentConfig& cfg, RngState& rng) {
  if (height < 1 || width < 1) throw CropError("random_resized_crop: empty image");
  const double area = static_cast<double>(height) * width;
  for (int attempt = 0; attempt < kCropAttempts; ++attempt) {
    const double target = area * rng.next_uniform(cfg.crop_area_ratio.lo, cfg.crop_area_ratio.hi);
    const double aspect = rng.next_uniform(cfg.aspect_ratio.lo, cfg.aspect_ratio.hi);
    const auto cw = static_cast<int>(std::lround(std::sqrt(target * aspect)));
    const auto ch = static_cast<int>(std::lround(std::sqrt(target / aspect)));
    if (cw > 0 && cw <= width && ch > 0 && ch <= height) {
      const auto top = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(height - ch + 1)));
      const auto left = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(width - cw + 1)));
      return {top, left, ch, cw, false};
    }
  }
  const int side = std::min(height, width);
  return {(height - side) / 2, (width - side) / 2, side, side, true};
}

ImageTensor random_resized_crop(const ImageTensor& t, const AugmentConfig& cfg, RngState& rng) {
  const CropRect r = sample_crop(t.height, t.width, cfg, rng);
  return image::bilinear_resize(image::crop(t, r.top, r.left, r.height, r.width), cfg.out_size, cfg.out_size);
}

std::optional<Homography> solve_homography(const Quad& from, const Quad& to) {
  // Unknowns h0..h7 with h8 = 1:
  //   u = (h0 x + h1 y + h2) / (h6 x + h7 y + 1)
  //   v = (h3 x + h4 y + h5) / (h6 x + h7 y + 1)
  double a[8][9] = {};
  for (int i = 0; i < 4; ++i) {
    const double x = from[i].x, y = from[i].y, u = to[i].x, v = to[i].y;
    double* r0 = a[2 * i];
    double* r1 = a[2 * i + 1];
    r0[0] = x, r0[1] = y, r0[2] = 1, r0[6] = -u * x, r0[7] = -u * y, r0[8] = u;
    r1[3] = x, r1[4] = y, r1[5] = 1, r1[6] = -v * x, r1[7] = -v * y, r1[8] = v;
  }
  double scale = 0.0;
  for (auto& row : a) {
    for (int j = 0; j < 8; ++j) scale = std::max(scale, std::abs(row[j]));
  }
  if (scale == 0.0) return std::nullopt;
  for (int col = 0; col < 8; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 8; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    if (std::abs(a[pivot][col]) < 1e-12 * scale) return std::nullopt;
    if (pivot != col) std::swap(a[pivot], a[col]);
    for (int r = 0; r < 8; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (int j = col; j < 9; ++j) a[r][j] -= f * a[col][j];
    }
  }
  Homography h{};
  for (int i = 0; i < 8; ++i) h[i] = a[i][8] / a[i][i];
  h[8] = 1.0;
  for (double v : h) {
    if (!std::isfinite(v)) return std::nullopt;
  }
  return h;
}

Point apply_homography(const Homography& h, Point p) {
  const double d = h[6] * p.x + h[7] * p.y + h[8];
  return {(h[0] * p.x + h[1] * p.y + h[2]) / d, (h[3] * p.x + h[4] * p.y + h[5]) / d};
}

Quad image_corners(int height, int width) {
  const double r = width - 1.0;
  const double b = height - 1.0;
  return {Point{0.0, 0.0}, Point{r, 0.0}, Point{r, b}, Point{0.0, b}};
}

ImageTensor warp_perspective(const ImageTensor& t, const Quad& original, const Quad& displaced) {
  const auto h = solve_homography(displaced, original);
  if (!h) {
    std::cerr << "warning: random_perspective: singular homography, returning the input unchanged\n";
    return t;
  }
  return inverse_warp(t, [&](Point p) { return apply_homography(*h, p); });
}

PerspectiveSample sample_perspective(int height, int width, const AugmentConfig& cfg, RngState& rng) {
  PerspectiveSample s;
  s.displaced = image_corners(height, width);
  if (!(rng.next_unit() < cfg.perspective_prob)) return s;
  s.applied = true;
  const double max_dx = cfg.perspective_distortion * width / 2.0;
  const double max_dy = cfg.perspective_distortion * height / 2.0;
  // Inward direction for TL, TR, BR, BL.
  constexpr int sx[4] = {1, -1, -1, 1};
  constexpr int sy[4] = {1, 1, -1, -1};
  for (int i = 0; i < 4; ++i) {
    const double dx = rng.next_uniform(0.0, max_dx);
    const double dy = rng.next_uniform(0.0, max_dy);
    s.displaced[i].x += sx[i] * dx;
    s.displaced[i].y += sy[i] * dy;
  }
  return s;
}

ImageTensor random_perspective(const ImageTensor& t, const AugmentConfig& cfg, RngState& rng) {
  const PerspectiveSample s = sample_perspective(t.height, t.width, cfg, rng);
  const Quad original = image_corners(t.height, t.width);
  bool moved = false;
  for (int i = 0; i < 4; ++i) {
    moved = moved || s.displaced[i].x != original[i].x || s.displaced[i].y != original[i].y;
  }
  if (!s.applied || !moved) return t;
  return warp_perspective(t, original, s.displaced);
}

ImageTensor rotate(const ImageTensor& t, double degrees) {
  if (degrees == 0.0) return t;
  const double theta = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double cx = (t.width - 1) / 2.0;
  const double cy = (t.height - 1) / 2.0;
  // Inverse of the counter-clockwise rotation in y-down image coordinates.
  return inverse_warp(t, [&](Point p) {
    const double dx = p.x - cx;
    const double dy = p.y - cy;
    return Point{cx + c * dx - s * dy, cy + s * dx + c * dy};
  });
}

ImageTensor random_rotation(const ImageTensor& t, const AugmentConfig& cfg, RngState& rng) {
  return rotate(t, rng.next_uniform(cfg.rotation_degrees.lo, cfg.rotation_degrees.hi));
}

ImageTensor train_transform(const image::GrayImage& img, const image::ClaheParams& p,
                            const image::NormalizationStats& s, const AugmentConfig& cfg, RngState& rng) {
  cfg.validate();
  s.validate();
  ImageTensor t = image::to_tensor(image::clahe(img, p));
  t = image::resize_shorter_side(t, image::kResizeShorterSide);
  t = random_resized_crop(t, cfg, rng);
  t = random_perspective(t, cfg, rng);
  t = random_rotation(t, cfg, rng);
  t = image::minmax_scale(t);
  t = image::replicate_channels(t);
  return image::channel_normalize(t, s);
}

}  // namespace cxr::augment
