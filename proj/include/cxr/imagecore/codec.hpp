#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cxr/imagecore/image.hpp"

namespace cxr::image {

// Decodes PNG (1..16-bit, gray/RGB/palette, with or without alpha) and JPEG
// (8-bit gray or RGB) into 8-bit grayscale. Colour is reduced with
// round(0.299R + 0.587G + 0.114B); 16-bit samples are first rescaled to 8 bits
// with v*255/65535 rounded half-up. Alpha is discarded.
//
// Throws DecodeError for malformed streams and UnsupportedFormat for anything
// that is neither PNG nor JPEG.
GrayImage decode_image(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_png(const GrayImage& img);
std::vector<std::uint8_t> encode_png(const RgbImage& img);
// 16-bit grayscale PNG, mostly for fixtures.
std::vector<std::uint8_t> encode_png16(int width, int height, std::span<const std::uint16_t> samples);
std::vector<std::uint8_t> encode_png_rgb16(int width, int height, std::span<const std::uint16_t> rgb);

std::vector<std::uint8_t> encode_jpeg(const RgbImage& img, int quality = 95);
std::vector<std::uint8_t> encode_jpeg(const GrayImage& img, int quality = 95);

RgbImage decode_png_rgb(std::span<const std::uint8_t> bytes);

}  // namespace cxr::image
