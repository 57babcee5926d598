#include "cxr/nn/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "cxr/error.hpp"

namespace cxr::nn {

std::string to_string(const Shape4& s) {
  return "(" + std::to_string(s[0]) + "," + std::to_string(s[1]) + "," + std::to_string(s[2]) + "," +
         std::to_string(s[3]) + ")";
}

Tensor4::Tensor4(Shape4 d, float fill) : dims(d) {
  for (int v : d) {
    if (v < 1) throw ShapeError("Tensor4 dimensions must be positive, got " + to_string(d));
  }
  data.assign(static_cast<std::size_t>(d[0]) * d[1] * d[2] * d[3], fill);
}

Tensor4::Tensor4(Shape4 d, std::vector<float> values) : dims(d), data(std::move(values)) {
  for (int v : d) {
    if (v < 1) throw ShapeError("Tensor4 dimensions must be positive, got " + to_string(d));
  }
  if (data.size() != static_cast<std::size_t>(d[0]) * d[1] * d[2] * d[3]) {
    throw ShapeError("Tensor4 value count does not match " + to_string(d));
  }
}

bool Tensor4::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](float v) { return std::isfinite(v); });
}

std::size_t element_count(std::span<const std::int64_t> shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

}  // namespace cxr::nn
