// Copyright 2026 The BoB Search Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bob/image.hpp"

#include <png.h>

#include <algorithm>
#include <csetjmp>
#include <cstdio>
#include <cstring>

#include "bob/error.hpp"

namespace bob {
namespace {

struct PngReader {
  png_image image;

  explicit PngReader(const std::filesystem::path& path) {
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str())) {
      std::string msg = image.message;
      png_image_free(&image);
      fail(ErrorCode::kImageIo, "cannot read PNG " + path.string() + ": " + msg);
    }
  }
  ~PngReader() { png_image_free(&image); }

  template <typename Raster>
  void finish(Raster& out, png_uint_32 format, const std::filesystem::path& path) {
    image.format = format;
    out = Raster(static_cast<int>(image.width), static_cast<int>(image.height));
    if (!png_image_finish_read(&image, nullptr, out.data.data(), 0, nullptr)) {
      fail(ErrorCode::kImageIo,
           "cannot decode PNG " + path.string() + ": " + image.message);
    }
  }
};

png_image make_write_image(int width, int height, png_uint_32 format) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  return image;
}

// Classic libpng API so the zlib level can be set; level 1 keeps corpus
// generation fast and the output is still lossless.
template <typename Raster>
void write_png_file(const std::filesystem::path& path, const Raster& raster, int channels) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) fail(ErrorCode::kImageIo, "cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    fail(ErrorCode::kImageIo, "cannot allocate PNG writer");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    fail(ErrorCode::kImageIo, "cannot write PNG " + path.string());
  }
  png_init_io(png, fp);
  png_set_compression_level(png, 1);
  png_set_IHDR(png, info, static_cast<png_uint_32>(raster.width), static_cast<png_uint_32>(raster.height), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(raster.width) * channels;
  for (int y = 0; y < raster.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(raster.data.data() + stride * y));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace

PngInfo read_png_info(const std::filesystem::path& path) {
  PngReader reader(path);
  return {static_cast<int>(reader.image.width),
          static_cast<int>(reader.image.height)};
}

RgbImage read_png_rgb(const std::filesystem::path& path) {
  PngReader reader(path);
  RgbImage out;
  reader.finish(out, PNG_FORMAT_RGB, path);
  return out;
}

GrayImage read_png_gray(const std::filesystem::path& path) {
  PngReader reader(path);
  GrayImage out;
  reader.finish(out, PNG_FORMAT_GRAY, path);
  return out;
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  write_png_file(path, image, 3);
}

void write_png(const std::filesystem::path& path, const GrayImage& image) {
  write_png_file(path, image, 1);
}

std::string encode_png(const RgbImage& raster) {
  png_image image = make_write_image(raster.width, raster.height, PNG_FORMAT_RGB);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, raster.data.data(),
                                 0, nullptr)) {
    fail(ErrorCode::kImageIo, std::string("cannot size PNG: ") + image.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0,
                                 raster.data.data(), 0, nullptr)) {
    fail(ErrorCode::kImageIo, std::string("cannot encode PNG: ") + image.message);
  }
  out.resize(size);
  png_image_free(&image);
  return out;
}

RgbImage downsample(const RgbImage& image, int factor) {
  if (factor < 1) fail(ErrorCode::kInvalidArgument, "downsample factor < 1");
  const int w = (image.width + factor - 1) / factor;
  const int h = (image.height + factor - 1) / factor;
  RgbImage out(w, h);
  for (int oy = 0; oy < h; ++oy) {
    for (int ox = 0; ox < w; ++ox) {
      unsigned sum[3] = {0, 0, 0};
      unsigned n = 0;
      for (int y = oy * factor; y < std::min(image.height, (oy + 1) * factor); ++y) {
        for (int x = ox * factor; x < std::min(image.width, (ox + 1) * factor); ++x) {
          const auto* p = image.pixel(x, y);
          sum[0] += p[0];
          sum[1] += p[1];
          sum[2] += p[2];
          ++n;
        }
      }
      auto* q = out.pixel(ox, oy);
      for (int c = 0; c < 3; ++c) q[c] = static_cast<std::uint8_t>((sum[c] + n / 2) / n);
    }
  }
  return out;
}

}  // namespace bob
