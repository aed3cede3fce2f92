/*
 * Copyright 2026 The shortcut-lens Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "slens/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

#include "slens/errors.hpp"

namespace slens {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError(path.string(), "cannot open");
  return f;
}

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what) *what = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

class PngReader {
 public:
  explicit PngReader(const std::filesystem::path& path)
      : path_(path), file_(open_file(path, "rb")) {
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, file_.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
      throw IoError(path.string(), "not a PNG file");
    png_ = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error_, png_error_fn,
                                  png_warning_fn);
    info_ = png_create_info_struct(png_);
    if (!png_ || !info_) throw IoError(path.string(), "libpng init failed");
    png_init_io(png_, file_.get());
    png_set_sig_bytes(png_, 8);
  }
  ~PngReader() { png_destroy_read_struct(&png_, &info_, nullptr); }
  PngReader(const PngReader&) = delete;
  PngReader& operator=(const PngReader&) = delete;

  PngInfo header() {
    if (setjmp(png_jmpbuf(png_))) throw IoError(path_.string(), error_);
    png_read_info(png_, info_);
    PngInfo out;
    out.width = static_cast<int>(png_get_image_width(png_, info_));
    out.height = static_cast<int>(png_get_image_height(png_, info_));
    const int color = png_get_color_type(png_, info_);
    const bool trns = png_get_valid(png_, info_, PNG_INFO_tRNS) != 0;
    switch (color) {
      case PNG_COLOR_TYPE_GRAY: out.channels = trns ? 2 : 1; break;
      case PNG_COLOR_TYPE_GRAY_ALPHA: out.channels = 2; break;
      case PNG_COLOR_TYPE_RGB: out.channels = trns ? 4 : 3; break;
      case PNG_COLOR_TYPE_PALETTE: out.channels = trns ? 4 : 3; break;
      default: out.channels = 4; break;
    }
    return out;
  }

  Image decode(bool keep_alpha) {
    const PngInfo info = header();
    if (setjmp(png_jmpbuf(png_))) throw IoError(path_.string(), error_);
    png_set_expand(png_);  // palette -> rgb, low-bit gray -> 8 bit, tRNS -> alpha
    png_set_strip_16(png_);
    png_read_update_info(png_, info_);
    const int stored = png_get_channels(png_, info_);
    const std::size_t rowbytes = png_get_rowbytes(png_, info_);
    std::vector<unsigned char> buf(rowbytes * info.height);
    std::vector<png_bytep> rows(info.height);
    for (int y = 0; y < info.height; ++y) rows[y] = buf.data() + y * rowbytes;
    png_read_image(png_, rows.data());

    const bool has_alpha = stored == 2 || stored == 4;
    const int color_channels = has_alpha ? stored - 1 : stored;
    const int out_channels = color_channels + (keep_alpha && has_alpha ? 1 : 0);
    Image img(out_channels, info.height, info.width);
    for (int y = 0; y < info.height; ++y) {
      for (int x = 0; x < info.width; ++x) {
        const unsigned char* px = rows[y] + x * stored;
        for (int c = 0; c < out_channels; ++c)
          img.at(c, y, x) = static_cast<float>(px[c]) / 255.0f;
      }
    }
    return img;
  }

 private:
  std::filesystem::path path_;
  FilePtr file_;
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
  std::string error_ = "corrupt PNG";
};

}  // namespace

PngInfo read_png_info(const std::filesystem::path& path) {
  PngReader reader(path);
  return reader.header();
}

Image read_png(const std::filesystem::path& path, bool keep_alpha) {
  PngReader reader(path);
  return reader.decode(keep_alpha);
}

void write_png(const std::filesystem::path& path, const Image& image) {
  const int color_type = [&] {
    switch (image.channels) {
      case 1: return PNG_COLOR_TYPE_GRAY;
      case 3: return PNG_COLOR_TYPE_RGB;
      case 4: return PNG_COLOR_TYPE_RGBA;
      default:
        throw ContractError("write_png: unsupported channel count " +
                            std::to_string(image.channels));
    }
  }();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FilePtr file = open_file(path, "wb");
  std::string error = "write failed";
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error,
                                            png_error_fn, png_warning_fn);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError(path.string(), "libpng init failed");
  }
  std::vector<unsigned char> buf(static_cast<std::size_t>(image.width) *
                                 image.height * image.channels);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < image.channels; ++c)
        buf[(static_cast<std::size_t>(y) * image.width + x) * image.channels + c] =
            static_cast<unsigned char>(quantize8(image.at(c, y, x)) * 255.0f + 0.5f);
  std::vector<png_bytep> rows(image.height);
  for (int y = 0; y < image.height; ++y)
    rows[y] = buf.data() + static_cast<std::size_t>(y) * image.width * image.channels;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(path.string(), error);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, image.width, image.height, 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace slens
