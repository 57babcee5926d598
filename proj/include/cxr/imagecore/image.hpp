#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cxr::image {

/// 8-bit single-channel raster, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0);
  GrayImage(int w, int h, std::vector<std::uint8_t> px);

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }

  bool operator==(const GrayImage&) const = default;
};

/// 8-bit interleaved RGB raster, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // r,g,b per pixel

  bool operator==(const RgbImage&) const = default;
};

/// Channel-major float tensor (C, H, W).
struct ImageTensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  ImageTensor() = default;
  ImageTensor(int c, int h, int w, float fill = 0.0f);
  ImageTensor(int c, int h, int w, std::vector<float> values);

  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height + y) * width + x;
  }
  float at(int c, int y, int x) const { return data[index(c, y, x)]; }
  float& at(int c, int y, int x) { return data[index(c, y, x)]; }
  std::span<const float> plane(int c) const { return {data.data() + c * plane_size(), plane_size()}; }
  std::span<float> plane(int c) { return {data.data() + c * plane_size(), plane_size()}; }

  bool operator==(const ImageTensor&) const = default;
};

/// Per-channel dataset mean and standard deviation.
struct NormalizationStats {
  std::array<float, 3> mean{0.485f, 0.456f, 0.406f};
  std::array<float, 3> std{0.229f, 0.224f, 0.225f};

  void validate() const;
};

struct ClaheParams {
  double clip_limit = 2.0;
  int tiles_x = 8;
  int tiles_y = 8;
  int bins = 256;

  void validate() const;
};

/// Tensor with the 8-bit values of `img` (0..255) as floats, one channel.
ImageTensor to_tensor(const GrayImage& img);

/// Rounds half-up and clamps into 0..255.
std::uint8_t to_u8(double v);

/// Converts a single-channel tensor holding 0..255 values back to 8-bit.
GrayImage to_gray(const ImageTensor& t);

}  // namespace cxr::image
