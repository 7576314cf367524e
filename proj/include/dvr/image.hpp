// Copyright 2026 The dvr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <png.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "dvr/common.hpp"
#include "dvr/raycaster.hpp"

namespace dvr {

// 2D intensity image in [0,1], row-major, top-left origin.
struct ScalarImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  ScalarImage() = default;
  ScalarImage(int w, int h, double fill = 0.0) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const ScalarImage&, const ScalarImage&) = default;
};

// 8-bit raster with 1 (gray) or 3 (RGB) interleaved channels.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> data;

  friend bool operator==(const Image8&, const Image8&) = default;
};

inline std::uint8_t quantize8(double v) { return static_cast<std::uint8_t>(std::lround(clamp01(v) * 255.0)); }

inline Image8 to_rgb8(const FrameImage& img) {
  Image8 out{img.width, img.height, 3, {}};
  out.data.reserve(img.pixels.size() * 3);
  for (const Rgba& p : img.pixels) {
    out.data.push_back(quantize8(p.r));
    out.data.push_back(quantize8(p.g));
    out.data.push_back(quantize8(p.b));
  }
  return out;
}

inline Image8 to_gray8(const ScalarImage& img) {
  Image8 out{img.width, img.height, 1, {}};
  out.data.reserve(img.data.size());
  for (const double v : img.data) out.data.push_back(quantize8(v));
  return out;
}

inline ScalarImage from_gray8(const Image8& img) {
  if (img.channels != 1) throw FormatError("expected a single-channel image");
  ScalarImage out(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = img.data[i] / 255.0;
  return out;
}

// Binary PPM (P6, maxval 255).
inline std::vector<std::uint8_t> encode_ppm(const Image8& img) {
  if (img.channels != 3) throw FormatError("PPM export needs an RGB image");
  const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.data.begin(), img.data.end());
  return out;
}

namespace detail {

struct PngWriteBuffer {
  std::vector<std::uint8_t> bytes;
};

inline void png_write_cb(png_structp png, png_bytep data, png_size_t len) {
  auto* buf = static_cast<PngWriteBuffer*>(png_get_io_ptr(png));
  buf->bytes.insert(buf->bytes.end(), data, data + len);
}

inline void png_flush_cb(png_structp) {}

struct PngReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

inline void png_read_cb(png_structp png, png_bytep out, png_size_t len) {
  auto* cur = static_cast<PngReadCursor*>(png_get_io_ptr(png));
  if (cur->offset + len > cur->bytes.size()) png_error(png, "truncated PNG stream");
  std::memcpy(out, cur->bytes.data() + cur->offset, len);
  cur->offset += len;
}

[[noreturn]] inline void png_error_cb(png_structp png, png_const_charp msg) {
  *static_cast<std::string*>(png_get_error_ptr(png)) = msg;
  png_longjmp(png, 1);
}

inline void png_warning_cb(png_structp, png_const_charp) {}

}  // namespace detail

// Deterministic PNG encoding: fixed compression settings and no timestamp
// chunks, so identical rasters always produce identical bytes.
inline std::vector<std::uint8_t> encode_png(const Image8& img) {
  if (img.channels != 1 && img.channels != 3) throw FormatError("PNG export supports gray or RGB only");
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_error_cb, detail::png_warning_cb);
  if (!png) throw Error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  detail::PngWriteBuffer buf;
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("PNG encode failed: " + err);
  }
  png_set_write_fn(png, &buf, detail::png_write_cb, detail::png_flush_cb);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
  for (int y = 0; y < img.height; ++y)
    rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(img.data.data() + stride * y);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return std::move(buf.bytes);
}

// Decodes 8-bit gray or RGB PNGs. Palette, alpha and 16-bit images are
// rejected so callers never get a silently converted raster.
inline Image8 decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw FormatError("not a PNG stream");
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_error_cb, detail::png_warning_cb);
  if (!png) throw Error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  detail::PngReadCursor cur{bytes, 0};
  Image8 img;
  std::vector<png_bytep> rows;
  std::string reject;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("PNG decode failed: " + err);
  }
  png_set_read_fn(png, &cur, detail::png_read_cb);
  png_read_info(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int type = png_get_color_type(png, info);
  if (depth != 8) {
    reject = "unsupported PNG bit depth " + std::to_string(depth);
  } else if (type == PNG_COLOR_TYPE_GRAY) {
    img.channels = 1;
  } else if (type == PNG_COLOR_TYPE_RGB) {
    img.channels = 3;
  } else {
    reject = "unsupported PNG color type " + std::to_string(type);
  }
  if (!reject.empty()) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw UnsupportedFormatError(reject);
  }
  if (png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) png_set_interlace_handling(png);
  png_read_update_info(png, info);
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
  img.data.resize(stride * img.height);
  rows.resize(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[static_cast<std::size_t>(y)] = img.data.data() + stride * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("short write to " + path);
}

// Chooses PPM for *.ppm paths and PNG otherwise.
inline std::vector<std::uint8_t> encode_frame(const FrameImage& img, const std::string& path_hint = ".png") {
  const Image8 rgb = to_rgb8(img);
  const bool ppm = path_hint.size() >= 4 && path_hint.compare(path_hint.size() - 4, 4, ".ppm") == 0;
  return ppm ? encode_ppm(rgb) : encode_png(rgb);
}

}  // namespace dvr
