#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cxr/imagecore/image.hpp"

namespace cxr::image {

using ToneMapping = std::array<std::uint8_t, 256>;

/// Per-tile equalisation tables, row-major over the tile grid.
struct ClaheMappings {
  int tiles_x = 0;
  int tiles_y = 0;
  std::vector<int> col_starts;  // tiles_x + 1 entries, last == width
  std::vector<int> row_starts;  // tiles_y + 1 entries, last == height
  std::vector<ToneMapping> tables;

  const ToneMapping& table(int tx, int ty) const { return tables[static_cast<std::size_t>(ty) * tiles_x + tx]; }
};

/// Tile boundaries for `extent` pixels split into `tiles`; the last tile absorbs
/// the remainder.
std::vector<int> tile_starts(int extent, int tiles);

/// Clipped-histogram tone mapping for one tile histogram holding `area` samples.
///
/// Clip threshold is max(1, floor(clip_limit * area / 256)). Mass above it is
/// spread evenly across all bins once; the integer remainder goes one unit per
/// bin starting at bin 0. The table is
/// m(v) = round((cdf(v) - cdf_min) * 255 / (area - cdf_min)), where cdf_min is
/// the cdf at the first occupied bin, clamped below at 0. If every sample
/// lands in a single bin the table falls back to round(cdf(v) * 255 / area).
ToneMapping clipped_equalization(std::array<std::int64_t, 256> histogram, std::int64_t area, double clip_limit);

ClaheMappings clahe_mappings(const GrayImage& img, const ClaheParams& p);

/// Contrast-limited adaptive histogram equalisation. Each pixel blends the
/// four nearest tile tables bilinearly by distance to the tile centres; pixels
/// beyond the outermost centres clamp to the edge tables.
/// Throws GridError when the image is smaller than the tile grid.
GrayImage clahe(const GrayImage& img, const ClaheParams& p);

}  // namespace cxr::image
