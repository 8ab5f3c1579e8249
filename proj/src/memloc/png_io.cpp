// Copyright 2026 The memloc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "memloc/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <memory>

#include "memloc/errors.hpp"

namespace memloc {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  return f;
}

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  auto* out = static_cast<std::string*>(png_get_error_ptr(png));
  if (out) *out = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

// Decodes into rows of raw samples. libpng needs setjmp-based error handling,
// so the C++ objects touched between setjmp and longjmp are trivially
// destructible or owned outside this function.
struct Decoded {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint8_t> bytes;
};

bool decode(std::FILE* fp, int wanted_depth, Decoded& out, std::string& err) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  if (!png) {
    err = "png_create_read_struct failed";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    err = "png_create_info_struct failed";
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (wanted_depth == 16 && depth != 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    err = "expected a 16-bit PNG, got " + std::to_string(depth) + "-bit";
    return false;
  }
  if (wanted_depth == 8) {
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  } else {
    png_set_swap(png);  // host little-endian rows
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  out.bytes.resize(rowbytes * out.height);
  std::vector<png_bytep> rows(out.height);
  for (int y = 0; y < out.height; ++y) rows[y] = out.bytes.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool encode(std::FILE* fp, int width, int height, int channels, int depth, const std::uint8_t* bytes,
            int level, std::string& err) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  if (!png) {
    err = "png_create_write_struct failed";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    err = "png_create_info_struct failed";
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  png_set_compression_level(png, level);
  const int color = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, width, height, depth, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (depth == 16) png_set_swap(png);
  const std::size_t rowbytes = static_cast<std::size_t>(width) * channels * (depth / 8);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(bytes + rowbytes * y));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

Image8 read_png8(const std::string& path, int channels) {
  require(channels == 1 || channels == 3, "read_png8: channels must be 1 or 3");
  auto fp = open_file(path, "rb");
  Decoded d;
  std::string err;
  if (!decode(fp.get(), 8, d, err)) fail(ErrorCode::kIo, "reading '" + path + "': " + err);

  Image8 img{d.width, d.height, channels, {}};
  const std::size_t n = static_cast<std::size_t>(d.width) * d.height;
  img.data.resize(n * channels);
  for (std::size_t i = 0; i < n; ++i) {
    if (d.channels == channels) {
      for (int c = 0; c < channels; ++c) img.data[i * channels + c] = d.bytes[i * d.channels + c];
    } else if (channels == 3) {  // gray -> rgb
      for (int c = 0; c < 3; ++c) img.data[i * 3 + c] = d.bytes[i];
    } else {  // rgb -> gray, integer luma
      const int r = d.bytes[i * 3], g = d.bytes[i * 3 + 1], b = d.bytes[i * 3 + 2];
      img.data[i] = static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
    }
  }
  return img;
}

Image16 read_png16(const std::string& path) {
  auto fp = open_file(path, "rb");
  Decoded d;
  std::string err;
  if (!decode(fp.get(), 16, d, err)) fail(ErrorCode::kIo, "reading '" + path + "': " + err);
  if (d.channels != 1) fail(ErrorCode::kIo, "reading '" + path + "': expected single-channel depth");
  Image16 img{d.width, d.height, {}};
  img.data.resize(static_cast<std::size_t>(d.width) * d.height);
  std::memcpy(img.data.data(), d.bytes.data(), img.data.size() * sizeof(std::uint16_t));
  return img;
}

void write_png(const std::string& path, const Image8& img, int compression_level) {
  require(img.channels == 1 || img.channels == 3, "write_png: channels must be 1 or 3");
  require(img.data.size() == static_cast<std::size_t>(img.width) * img.height * img.channels,
          "write_png: buffer size mismatch");
  auto fp = open_file(path, "wb");
  std::string err;
  if (!encode(fp.get(), img.width, img.height, img.channels, 8, img.data.data(), compression_level, err)) {
    fail(ErrorCode::kIo, "writing '" + path + "': " + err);
  }
}

void write_png16(const std::string& path, const Image16& img, int compression_level) {
  require(img.data.size() == static_cast<std::size_t>(img.width) * img.height, "write_png16: buffer size mismatch");
  auto fp = open_file(path, "wb");
  std::string err;
  if (!encode(fp.get(), img.width, img.height, 1, 16, reinterpret_cast<const std::uint8_t*>(img.data.data()),
              compression_level, err)) {
    fail(ErrorCode::kIo, "writing '" + path + "': " + err);
  }
}

}  // namespace memloc
