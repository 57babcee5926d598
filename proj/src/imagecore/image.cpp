#include "cxr/imagecore/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cxr/error.hpp"

namespace cxr::image {

GrayImage::GrayImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {
  if (w < 1 || h < 1) throw ShapeError("GrayImage dimensions must be positive");
}

GrayImage::GrayImage(int w, int h, std::vector<std::uint8_t> px) : width(w), height(h), pixels(std::move(px)) {
  if (w < 1 || h < 1) throw ShapeError("GrayImage dimensions must be positive");
  if (pixels.size() != static_cast<std::size_t>(w) * h) throw ShapeError("GrayImage pixel count mismatch");
}

ImageTensor::ImageTensor(int c, int h, int w, float fill)
    : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {
  if (c < 1 || h < 1 || w < 1) throw ShapeError("ImageTensor dimensions must be positive");
}

ImageTensor::ImageTensor(int c, int h, int w, std::vector<float> values)
    : channels(c), height(h), width(w), data(std::move(values)) {
  if (c < 1 || h < 1 || w < 1) throw ShapeError("ImageTensor dimensions must be positive");
  if (data.size() != static_cast<std::size_t>(c) * h * w) throw ShapeError("ImageTensor value count mismatch");
}

void NormalizationStats::validate() const {
  for (int c = 0; c < 3; ++c) {
    if (!(std[c] > 0.0f) || !std::isfinite(std[c]) || !std::isfinite(mean[c])) {
      throw ConfigError("normalization std must be positive and finite (channel " + std::to_string(c) + ")");
    }
  }
}

void ClaheParams::validate() const {
  if (!(clip_limit > 0.0) || !std::isfinite(clip_limit)) throw ConfigError("clahe clip_limit must be > 0");
  if (tiles_x < 1 || tiles_y < 1) throw ConfigError("clahe grid must be at least 1x1");
  if (bins != 256) throw ConfigError("clahe operates on 256 bins");
}

ImageTensor to_tensor(const GrayImage& img) {
  ImageTensor t(1, img.height, img.width);
  std::transform(img.pixels.begin(), img.pixels.end(), t.data.begin(),
                 [](std::uint8_t v) { return static_cast<float>(v); });
  return t;
}

std::uint8_t to_u8(double v) {
  const double r = std::floor(v + 0.5);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

GrayImage to_gray(const ImageTensor& t) {
  if (t.channels != 1) throw ChannelError("to_gray expects a single-channel tensor");
  GrayImage img(t.width, t.height);
  std::transform(t.data.begin(), t.data.end(), img.pixels.begin(), [](float v) { return to_u8(v); });
  return img;
}

}  // namespace cxr::image
