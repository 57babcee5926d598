#include "cxr/imagecore/codec.hpp"

#include <png.h>
// jpeglib.h needs size_t and FILE declared first.
#include <cstdio>
#include <jpeglib.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "cxr/error.hpp"

namespace cxr::image {
namespace {

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};

std::uint8_t rescale16(unsigned v) {
  // v*255/65535 rounded half-up, in integers.
  return static_cast<std::uint8_t>((v * 510u + 65535u) / 131070u);
}

std::uint8_t luma(unsigned r, unsigned g, unsigned b) {
  const double y = 0.299 * r + 0.587 * g + 0.114 * b;
  return static_cast<std::uint8_t>(std::min(255.0, std::floor(y + 0.5)));
}

// ---------------------------------------------------------------------------
// PNG

struct PngReadContext {
  std::span<const std::uint8_t> input;
  std::size_t pos = 0;
  std::string message;
  std::vector<std::uint8_t> buffer;
  std::vector<png_bytep> rows;
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t n) {
  auto* ctx = static_cast<PngReadContext*>(png_get_io_ptr(png));
  if (ctx->pos + n > ctx->input.size()) png_error(png, "unexpected end of PNG stream");
  std::memcpy(out, ctx->input.data() + ctx->pos, n);
  ctx->pos += n;
}

void png_on_error(png_structp png, png_const_charp msg) {
  auto* ctx = static_cast<PngReadContext*>(png_get_error_ptr(png));
  if (ctx != nullptr) ctx->message = msg;
  png_longjmp(png, 1);
}

void png_on_warning(png_structp, png_const_charp) {}

struct PngLayout {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
};

// Decodes to interleaved samples; 16-bit samples stay big-endian in ctx.buffer.
PngLayout read_png(PngReadContext& ctx) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &ctx, png_on_error, png_on_warning);
  if (png == nullptr) throw DecodeError("png: out of memory");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DecodeError("png: out of memory");
  }
  PngLayout layout;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DecodeError("png: " + ctx.message);
  }
  png_set_read_fn(png, &ctx, png_read_from_memory);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  layout.width = static_cast<int>(png_get_image_width(png, info));
  layout.height = static_cast<int>(png_get_image_height(png, info));
  layout.channels = png_get_channels(png, info);
  layout.bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);

  ctx.buffer.resize(rowbytes * static_cast<std::size_t>(layout.height));
  ctx.rows.resize(static_cast<std::size_t>(layout.height));
  for (int y = 0; y < layout.height; ++y) ctx.rows[y] = ctx.buffer.data() + rowbytes * y;
  png_read_image(png, ctx.rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return layout;
}

GrayImage decode_png(std::span<const std::uint8_t> bytes) {
  PngReadContext ctx;
  ctx.input = bytes;
  const PngLayout layout = read_png(ctx);
  if (layout.channels != 1 && layout.channels != 3) {
    throw UnsupportedFormat("png: unexpected channel count " + std::to_string(layout.channels));
  }
  GrayImage out(layout.width, layout.height);
  const std::size_t n = static_cast<std::size_t>(layout.width) * layout.height;
  const std::uint8_t* src = ctx.buffer.data();
  auto sample = [&](std::size_t i) -> std::uint8_t {
    if (layout.bit_depth == 16) return rescale16((unsigned{src[2 * i]} << 8) | src[2 * i + 1]);
    return src[i];
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (layout.channels == 1) {
      out.pixels[i] = sample(i);
    } else {
      out.pixels[i] = luma(sample(3 * i), sample(3 * i + 1), sample(3 * i + 2));
    }
  }
  return out;
}

struct PngWriteContext {
  std::vector<std::uint8_t> out;
  std::string message;
};

void png_write_to_memory(png_structp png, png_bytep data, png_size_t n) {
  auto* ctx = static_cast<PngWriteContext*>(png_get_io_ptr(png));
  ctx->out.insert(ctx->out.end(), data, data + n);
}

void png_flush_noop(png_structp) {}

void png_on_write_error(png_structp png, png_const_charp msg) {
  auto* ctx = static_cast<PngWriteContext*>(png_get_error_ptr(png));
  if (ctx != nullptr) ctx->message = msg;
  png_longjmp(png, 1);
}

std::vector<std::uint8_t> write_png(int width, int height, int color_type, int bit_depth,
                                    const std::uint8_t* rows_data, std::size_t rowbytes) {
  if (width < 1 || height < 1) throw DecodeError("png: cannot encode an empty image");
  PngWriteContext ctx;
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) rows[y] = const_cast<png_bytep>(rows_data + rowbytes * y);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &ctx, png_on_write_error, png_on_warning);
  if (png == nullptr) throw DecodeError("png: out of memory");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw DecodeError("png: out of memory");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DecodeError("png encode: " + ctx.message);
  }
  png_set_write_fn(png, &ctx, png_write_to_memory, png_flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return std::move(ctx.out);
}

std::vector<std::uint8_t> to_big_endian(std::span<const std::uint16_t> samples) {
  std::vector<std::uint8_t> bytes(samples.size() * 2);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    bytes[2 * i] = static_cast<std::uint8_t>(samples[i] >> 8);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(samples[i] & 0xFF);
  }
  return bytes;
}

// ---------------------------------------------------------------------------
// JPEG

struct JpegError {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_on_error(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegError*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

void jpeg_on_message(j_common_ptr cinfo, int level) {
  // Count warnings (level -1) so truncated streams can be rejected.
  if (level < 0) cinfo->err->num_warnings++;
}

struct JpegReadContext {
  jpeg_decompress_struct cinfo;
  JpegError err;
  std::vector<std::uint8_t> buffer;
};

GrayImage decode_jpeg(std::span<const std::uint8_t> bytes) {
  JpegReadContext ctx;
  ctx.cinfo.err = jpeg_std_error(&ctx.err.base);
  ctx.err.base.error_exit = jpeg_on_error;
  ctx.err.base.emit_message = jpeg_on_message;
  if (setjmp(ctx.err.jump)) {
    jpeg_destroy_decompress(&ctx.cinfo);
    throw DecodeError(std::string("jpeg: ") + ctx.err.message);
  }
  jpeg_create_decompress(&ctx.cinfo);
  jpeg_mem_src(&ctx.cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&ctx.cinfo, TRUE);
  const J_COLOR_SPACE space = ctx.cinfo.jpeg_color_space;
  if (space == JCS_CMYK || space == JCS_YCCK) {
    jpeg_destroy_decompress(&ctx.cinfo);
    throw UnsupportedFormat("jpeg: CMYK/YCCK images are not supported");
  }
  ctx.cinfo.out_color_space = space == JCS_GRAYSCALE ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&ctx.cinfo);
  const int width = static_cast<int>(ctx.cinfo.output_width);
  const int height = static_cast<int>(ctx.cinfo.output_height);
  const int comps = ctx.cinfo.output_components;
  const std::size_t stride = static_cast<std::size_t>(width) * comps;
  ctx.buffer.resize(stride * height);
  while (ctx.cinfo.output_scanline < ctx.cinfo.output_height) {
    JSAMPROW row = ctx.buffer.data() + stride * ctx.cinfo.output_scanline;
    jpeg_read_scanlines(&ctx.cinfo, &row, 1);
  }
  jpeg_finish_decompress(&ctx.cinfo);
  const long warnings = ctx.cinfo.err->num_warnings;
  jpeg_destroy_decompress(&ctx.cinfo);
  if (warnings > 0) throw DecodeError("jpeg: corrupt or truncated stream");

  GrayImage out(width, height);
  const std::size_t n = static_cast<std::size_t>(width) * height;
  for (std::size_t i = 0; i < n; ++i) {
    out.pixels[i] = comps == 1 ? ctx.buffer[i]
                               : luma(ctx.buffer[3 * i], ctx.buffer[3 * i + 1], ctx.buffer[3 * i + 2]);
  }
  return out;
}

struct JpegWriteContext {
  jpeg_compress_struct cinfo;
  JpegError err;
  unsigned char* mem = nullptr;
  unsigned long mem_size = 0;
};

std::vector<std::uint8_t> write_jpeg(int width, int height, int comps, const std::uint8_t* data, int quality) {
  JpegWriteContext ctx;
  ctx.cinfo.err = jpeg_std_error(&ctx.err.base);
  ctx.err.base.error_exit = jpeg_on_error;
  if (setjmp(ctx.err.jump)) {
    jpeg_destroy_compress(&ctx.cinfo);
    std::free(ctx.mem);
    throw DecodeError(std::string("jpeg encode: ") + ctx.err.message);
  }
  jpeg_create_compress(&ctx.cinfo);
  jpeg_mem_dest(&ctx.cinfo, &ctx.mem, &ctx.mem_size);
  ctx.cinfo.image_width = static_cast<JDIMENSION>(width);
  ctx.cinfo.image_height = static_cast<JDIMENSION>(height);
  ctx.cinfo.input_components = comps;
  ctx.cinfo.in_color_space = comps == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_set_defaults(&ctx.cinfo);
  jpeg_set_quality(&ctx.cinfo, quality, TRUE);
  jpeg_start_compress(&ctx.cinfo, TRUE);
  const std::size_t stride = static_cast<std::size_t>(width) * comps;
  while (ctx.cinfo.next_scanline < ctx.cinfo.image_height) {
    JSAMPROW row = const_cast<JSAMPROW>(data + stride * ctx.cinfo.next_scanline);
    jpeg_write_scanlines(&ctx.cinfo, &row, 1);
  }
  jpeg_finish_compress(&ctx.cinfo);
  std::vector<std::uint8_t> out(ctx.mem, ctx.mem + ctx.mem_size);
  jpeg_destroy_compress(&ctx.cinfo);
  std::free(ctx.mem);
  return out;
}

bool looks_like_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) return false;
  const std::size_t n = std::min<std::size_t>(bytes.size(), 8);
  return std::equal(bytes.begin(), bytes.begin() + n, kPngSignature);
}

bool looks_like_jpeg(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 0xFF && bytes[1] == 0xD8;
}

}  // namespace

GrayImage decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw DecodeError("empty image stream");
  if (looks_like_png(bytes)) return decode_png(bytes);
  if (looks_like_jpeg(bytes)) return decode_jpeg(bytes);
  throw UnsupportedFormat("not a PNG or JPEG stream");
}

RgbImage decode_png_rgb(std::span<const std::uint8_t> bytes) {
  if (!looks_like_png(bytes)) throw UnsupportedFormat("not a PNG stream");
  PngReadContext ctx;
  ctx.input = bytes;
  const PngLayout layout = read_png(ctx);
  if (layout.bit_depth != 8) throw UnsupportedFormat("decode_png_rgb expects 8-bit samples");
  RgbImage out{layout.width, layout.height, {}};
  const std::size_t n = static_cast<std::size_t>(layout.width) * layout.height;
  out.pixels.resize(3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      out.pixels[3 * i + c] = layout.channels == 1 ? ctx.buffer[i] : ctx.buffer[3 * i + c];
    }
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

std::vector<std::uint8_t> encode_png(const GrayImage& img) {
  return write_png(img.width, img.height, PNG_COLOR_TYPE_GRAY, 8, img.pixels.data(),
                   static_cast<std::size_t>(img.width));
}

std::vector<std::uint8_t> encode_png(const RgbImage& img) {
  return write_png(img.width, img.height, PNG_COLOR_TYPE_RGB, 8, img.pixels.data(),
                   static_cast<std::size_t>(img.width) * 3);
}

std::vector<std::uint8_t> encode_png16(int width, int height, std::span<const std::uint16_t> samples) {
  const auto bytes = to_big_endian(samples);
  return write_png(width, height, PNG_COLOR_TYPE_GRAY, 16, bytes.data(), static_cast<std::size_t>(width) * 2);
}

std::vector<std::uint8_t> encode_png_rgb16(int width, int height, std::span<const std::uint16_t> rgb) {
  const auto bytes = to_big_endian(rgb);
  return write_png(width, height, PNG_COLOR_TYPE_RGB, 16, bytes.data(), static_cast<std::size_t>(width) * 6);
}

std::vector<std::uint8_t> encode_jpeg(const RgbImage& img, int quality) {
  return write_jpeg(img.width, img.height, 3, img.pixels.data(), quality);
}

std::vector<std::uint8_t> encode_jpeg(const GrayImage& img, int quality) {
  return write_jpeg(img.width, img.height, 1, img.pixels.data(), quality);
}

}  // namespace cxr::image
