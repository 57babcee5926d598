#include "cxr/imagecore/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cxr/error.hpp"

namespace cxr::image {
namespace {

struct AxisTap {
  int i0;
  int i1;
  double frac;
};

std::vector<AxisTap> axis_taps(int in, int out) {
  std::vector<AxisTap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int d = 0; d < out; ++d) {
    double s = (d + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in - 1));
    const int i0 = static_cast<int>(std::floor(s));
    const int i1 = std::min(i0 + 1, in - 1);
    taps[d] = {i0, i1, s - i0};
  }
  return taps;
}

ImageTensor minmax_values(int c, int h, int w, std::span<const double> values) {
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  ImageTensor out(c, h, w);
  if (range > 0.0) {
    for (std::size_t i = 0; i < values.size(); ++i) out.data[i] = static_cast<float>((values[i] - lo) / range);
  }
  return out;
}

}  // namespace

ImageTensor minmax_scale(const GrayImage& img) {
  std::vector<double> v(img.pixels.begin(), img.pixels.end());
  return minmax_values(1, img.height, img.width, v);
}

ImageTensor minmax_scale(const ImageTensor& t) {
  std::vector<double> v(t.data.begin(), t.data.end());
  return minmax_values(t.channels, t.height, t.width, v);
}

ImageTensor bilinear_resize(const ImageTensor& t, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw ShapeError("bilinear_resize: output size must be positive");
  const auto ty = axis_taps(t.height, out_h);
  const auto tx = axis_taps(t.width, out_w);
  ImageTensor out(t.channels, out_h, out_w);
  for (int c = 0; c < t.channels; ++c) {
    const auto src = t.plane(c);
    auto dst = out.plane(c);
    for (int y = 0; y < out_h; ++y) {
      const AxisTap& ay = ty[y];
      const float* r0 = src.data() + static_cast<std::size_t>(ay.i0) * t.width;
      const float* r1 = src.data() + static_cast<std::size_t>(ay.i1) * t.width;
      for (int x = 0; x < out_w; ++x) {
        const AxisTap& ax = tx[x];
        const double top = (1.0 - ax.frac) * r0[ax.i0] + ax.frac * r0[ax.i1];
        const double bottom = (1.0 - ax.frac) * r1[ax.i0] + ax.frac * r1[ax.i1];
        dst[static_cast<std::size_t>(y) * out_w + x] = static_cast<float>((1.0 - ay.frac) * top + ay.frac * bottom);
      }
    }
  }
  return out;
}

std::vector<double> bilinear_resize(std::span<const double> src, int in_h, int in_w, int out_h, int out_w) {
  if (in_h < 1 || in_w < 1 || src.size() != static_cast<std::size_t>(in_h) * in_w) {
    throw ShapeError("bilinear_resize: source plane does not match its dimensions");
  }
  if (out_h < 1 || out_w < 1) throw ShapeError("bilinear_resize: output size must be positive");
  const auto ty = axis_taps(in_h, out_h);
  const auto tx = axis_taps(in_w, out_w);
  std::vector<double> out(static_cast<std::size_t>(out_h) * out_w);
  for (int y = 0; y < out_h; ++y) {
    const AxisTap& ay = ty[y];
    const double* r0 = src.data() + static_cast<std::size_t>(ay.i0) * in_w;
    const double* r1 = src.data() + static_cast<std::size_t>(ay.i1) * in_w;
    for (int x = 0; x < out_w; ++x) {
      const AxisTap& ax = tx[x];
      const double top = (1.0 - ax.frac) * r0[ax.i0] + ax.frac * r0[ax.i1];
      const double bottom = (1.0 - ax.frac) * r1[ax.i0] + ax.frac * r1[ax.i1];
      out[static_cast<std::size_t>(y) * out_w + x] = (1.0 - ay.frac) * top + ay.frac * bottom;
    }
  }
  return out;
}

ImageTensor resize_shorter_side(const ImageTensor& t, int shorter) {
  if (shorter < 1) throw ShapeError("resize_shorter_side: target must be positive");
  int out_h;
  int out_w;
  if (t.height <= t.width) {
    out_h = shorter;
    out_w = static_cast<int>(static_cast<long long>(t.width) * shorter / t.height);
  } else {
    out_w = shorter;
    out_h = static_cast<int>(static_cast<long long>(t.height) * shorter / t.width);
  }
  return bilinear_resize(t, out_h, std::max(out_w, 1));
}

ImageTensor crop(const ImageTensor& t, int top, int left, int height, int width) {
  if (top < 0 || left < 0 || height < 1 || width < 1 || top + height > t.height || left + width > t.width) {
    throw ShapeError("crop rectangle outside the image");
  }
  ImageTensor out(t.channels, height, width);
  for (int c = 0; c < t.channels; ++c) {
    for (int y = 0; y < height; ++y) {
      const float* src = &t.data[t.index(c, top + y, left)];
      std::copy(src, src + width, &out.data[out.index(c, y, 0)]);
    }
  }
  return out;
}

ImageTensor center_crop(const ImageTensor& t, int height, int width) {
  if (height > t.height || width > t.width) {
    throw ShapeError("center_crop: " + std::to_string(height) + "x" + std::to_string(width) +
                     " does not fit in " + std::to_string(t.height) + "x" + std::to_string(t.width));
  }
  return crop(t, (t.height - height) / 2, (t.width - width) / 2, height, width);
}

ImageTensor replicate_channels(const ImageTensor& t) {
  if (t.channels != 1) throw ChannelError("replicate_channels expects 1 channel, got " + std::to_string(t.channels));
  ImageTensor out(3, t.height, t.width);
  for (int c = 0; c < 3; ++c) std::copy(t.data.begin(), t.data.end(), out.plane(c).begin());
  return out;
}

ImageTensor channel_normalize(const ImageTensor& t, const NormalizationStats& s) {
  if (t.channels != 3) throw ChannelError("channel_normalize expects 3 channels, got " + std::to_string(t.channels));
  s.validate();
  ImageTensor out(3, t.height, t.width);
  for (int c = 0; c < 3; ++c) {
    const double mean = s.mean[c];
    const double sd = s.std[c];
    const auto src = t.plane(c);
    auto dst = out.plane(c);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>((src[i] - mean) / sd);
  }
  return out;
}

ImageTensor channel_denormalize(const ImageTensor& t, const NormalizationStats& s) {
  if (t.channels != 3) throw ChannelError("channel_denormalize expects 3 channels, got " + std::to_string(t.channels));
  ImageTensor out(3, t.height, t.width);
  for (int c = 0; c < 3; ++c) {
    const auto src = t.plane(c);
    auto dst = out.plane(c);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(src[i] * double{s.std[c]} + s.mean[c]);
  }
  return out;
}

}  // namespace cxr::image
