#include "cxr/imagecore/clahe.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cxr/error.hpp"

namespace cxr::image {
namespace {

struct Blend {
  int t0;
  int t1;
  double w;
};

// Neighbouring tiles and blend weight for every pixel along one axis.
std::vector<Blend> axis_blend(const std::vector<int>& starts) {
  const int tiles = static_cast<int>(starts.size()) - 1;
  const int extent = starts.back();
  std::vector<double> centers(static_cast<std::size_t>(tiles));
  for (int i = 0; i < tiles; ++i) centers[i] = starts[i] + (starts[i + 1] - starts[i]) / 2.0;

  std::vector<Blend> out(static_cast<std::size_t>(extent));
  int i = 0;
  for (int x = 0; x < extent; ++x) {
    const double px = x + 0.5;
    if (px < centers.front()) {
      out[x] = {0, 0, 0.0};
      continue;
    }
    if (px >= centers.back()) {
      out[x] = {tiles - 1, tiles - 1, 0.0};
      continue;
    }
    while (px >= centers[i + 1]) ++i;
    out[x] = {i, i + 1, (px - centers[i]) / (centers[i + 1] - centers[i])};
  }
  return out;
}

}  // namespace

std::vector<int> tile_starts(int extent, int tiles) {
  std::vector<int> starts(static_cast<std::size_t>(tiles) + 1);
  const int base = extent / tiles;
  for (int i = 0; i < tiles; ++i) starts[i] = i * base;
  starts[tiles] = extent;
  return starts;
}

ToneMapping clipped_equalization(std::array<std::int64_t, 256> hist, std::int64_t area, double clip_limit) {
  const auto clip = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(clip_limit * area / 256.0)));
  std::int64_t excess = 0;
  for (auto& h : hist) {
    if (h > clip) {
      excess += h - clip;
      h = clip;
    }
  }
  const std::int64_t batch = excess / 256;
  const std::int64_t residual = excess % 256;
  for (int b = 0; b < 256; ++b) hist[b] += batch + (b < residual ? 1 : 0);

  std::array<std::int64_t, 256> cdf{};
  std::int64_t running = 0;
  std::int64_t cdf_min = -1;
  for (int b = 0; b < 256; ++b) {
    running += hist[b];
    cdf[b] = running;
    if (cdf_min < 0 && hist[b] > 0) cdf_min = running;
  }

  ToneMapping table{};
  const std::int64_t denom = area - cdf_min;
  for (int v = 0; v < 256; ++v) {
    double mapped;
    if (denom > 0) {
      mapped = static_cast<double>(cdf[v] - cdf_min) * 255.0 / static_cast<double>(denom);
    } else {
      mapped = static_cast<double>(cdf[v]) * 255.0 / static_cast<double>(area);
    }
    table[v] = to_u8(std::max(0.0, mapped));
  }
  return table;
}

ClaheMappings clahe_mappings(const GrayImage& img, const ClaheParams& p) {
  p.validate();
  if (img.width < p.tiles_x || img.height < p.tiles_y) {
    throw GridError("clahe: image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                    " is smaller than the " + std::to_string(p.tiles_x) + "x" + std::to_string(p.tiles_y) + " grid");
  }
  ClaheMappings m;
  m.tiles_x = p.tiles_x;
  m.tiles_y = p.tiles_y;
  m.col_starts = tile_starts(img.width, p.tiles_x);
  m.row_starts = tile_starts(img.height, p.tiles_y);
  m.tables.reserve(static_cast<std::size_t>(p.tiles_x) * p.tiles_y);
  for (int ty = 0; ty < p.tiles_y; ++ty) {
    for (int tx = 0; tx < p.tiles_x; ++tx) {
      std::array<std::int64_t, 256> hist{};
      for (int y = m.row_starts[ty]; y < m.row_starts[ty + 1]; ++y) {
        for (int x = m.col_starts[tx]; x < m.col_starts[tx + 1]; ++x) ++hist[img.at(x, y)];
      }
      const std::int64_t area = static_cast<std::int64_t>(m.row_starts[ty + 1] - m.row_starts[ty]) *
                                (m.col_starts[tx + 1] - m.col_starts[tx]);
      m.tables.push_back(clipped_equalization(hist, area, p.clip_limit));
    }
  }
  return m;
}

GrayImage clahe(const GrayImage& img, const ClaheParams& p) {
  const ClaheMappings m = clahe_mappings(img, p);
  const auto bx = axis_blend(m.col_starts);
  const auto by = axis_blend(m.row_starts);
  GrayImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    const Blend& ry = by[y];
    for (int x = 0; x < img.width; ++x) {
      const Blend& rx = bx[x];
      const int v = img.at(x, y);
      const double top = (1.0 - rx.w) * m.table(rx.t0, ry.t0)[v] + rx.w * m.table(rx.t1, ry.t0)[v];
      const double bottom = (1.0 - rx.w) * m.table(rx.t0, ry.t1)[v] + rx.w * m.table(rx.t1, ry.t1)[v];
      out.at(x, y) = to_u8((1.0 - ry.w) * top + ry.w * bottom);
    }
  }
  return out;
}

}  // namespace cxr::image
