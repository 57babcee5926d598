#pragma once

#include <span>
#include <vector>

#include "cxr/imagecore/image.hpp"

namespace cxr::image {

/// Min-max scaling to [0,1]. A constant image maps to all zeros.
ImageTensor minmax_scale(const GrayImage& img);
/// Same scaling over every value of a float tensor (all channels jointly).
ImageTensor minmax_scale(const ImageTensor& t);

/// Bilinear resize with half-pixel centres and no corner alignment:
/// src = (dst + 0.5) * in / out - 0.5, clamped to [0, in - 1].
ImageTensor bilinear_resize(const ImageTensor& t, int out_h, int out_w);
/// Same sampling on one double-precision plane.
std::vector<double> bilinear_resize(std::span<const double> src, int in_h, int in_w, int out_h, int out_w);

/// Resizes so the shorter side equals `shorter`, keeping the aspect ratio.
/// The longer side is floor(long * shorter / short).
ImageTensor resize_shorter_side(const ImageTensor& t, int shorter);

ImageTensor crop(const ImageTensor& t, int top, int left, int height, int width);

/// Centred crop; offsets are floor((in - out) / 2).
ImageTensor center_crop(const ImageTensor& t, int height, int width);

/// 1xHxW -> 3xHxW. Throws ChannelError unless the input has one channel.
ImageTensor replicate_channels(const ImageTensor& t);

/// (x - mean_c) / std_c per channel. Throws ChannelError unless 3 channels.
ImageTensor channel_normalize(const ImageTensor& t, const NormalizationStats& s);
ImageTensor channel_denormalize(const ImageTensor& t, const NormalizationStats& s);

}  // namespace cxr::image
