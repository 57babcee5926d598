#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cxr::nn {

using Shape4 = std::array<int, 4>;  // batch, channels, height, width

std::string to_string(const Shape4& s);

/// Dense NCHW single-precision tensor.
struct Tensor4 {
  Shape4 dims{0, 0, 0, 0};
  std::vector<float> data;

  Tensor4() = default;
  explicit Tensor4(Shape4 d, float fill = 0.0f);
  Tensor4(Shape4 d, std::vector<float> values);

  int n() const { return dims[0]; }
  int c() const { return dims[1]; }
  int h() const { return dims[2]; }
  int w() const { return dims[3]; }
  std::size_t size() const { return data.size(); }
  std::size_t plane_size() const { return static_cast<std::size_t>(dims[2]) * dims[3]; }
  std::size_t sample_size() const { return plane_size() * dims[1]; }

  std::size_t index(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * dims[1] + c) * dims[2] + y) * dims[3] + x;
  }
  float at(int n, int c, int y, int x) const { return data[index(n, c, y, x)]; }
  float& at(int n, int c, int y, int x) { return data[index(n, c, y, x)]; }

  const float* plane(int n, int c) const { return data.data() + index(n, c, 0, 0); }
  float* plane(int n, int c) { return data.data() + index(n, c, 0, 0); }

  bool all_finite() const;

  bool operator==(const Tensor4&) const = default;
};

std::size_t element_count(std::span<const std::int64_t> shape);

}  // namespace cxr::nn
