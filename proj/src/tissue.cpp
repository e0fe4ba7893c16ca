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

#include "bob/tissue.hpp"

#include <algorithm>
#include <cmath>

#include "bob/error.hpp"

namespace bob {

TissueMask::TissueMask(double magnification, int width, int height,
                       std::vector<std::uint8_t> bits, bool no_tissue)
    : magnification_(magnification),
      width_(width),
      height_(height),
      no_tissue_(no_tissue),
      bits_(std::move(bits)) {
  if (bits_.size() != static_cast<std::size_t>(width) * height)
    fail(ErrorCode::kDimensionMismatch, "tissue mask size does not match dimensions");
  for (auto& b : bits_) b = b ? 1 : 0;
  const std::size_t stride = static_cast<std::size_t>(width_) + 1;
  integral_.assign(stride * (static_cast<std::size_t>(height_) + 1), 0);
  for (int y = 0; y < height_; ++y) {
    std::int64_t row = 0;
    for (int x = 0; x < width_; ++x) {
      row += bits_[static_cast<std::size_t>(y) * width_ + x];
      integral_[(y + 1) * stride + x + 1] = integral_[y * stride + x + 1] + row;
    }
  }
}

std::int64_t TissueMask::count(int x, int y, int w, int h) const {
  const std::size_t stride = static_cast<std::size_t>(width_) + 1;
  const auto at = [&](int xx, int yy) { return integral_[yy * stride + xx]; };
  return at(x + w, y + h) - at(x, y + h) - at(x + w, y) + at(x, y);
}

double TissueMask::fraction() const {
  if (width_ == 0 || height_ == 0) return 0.0;
  return static_cast<double>(count(0, 0, width_, height_)) /
         (static_cast<double>(width_) * height_);
}

std::array<std::int64_t, 256> luminance_histogram(const RgbImage& image) {
  std::array<std::int64_t, 256> hist{};
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  for (std::size_t i = 0; i < n; ++i) {
    const long v = std::lround(luminance(image.data.data() + 3 * i));
    ++hist[static_cast<std::size_t>(std::clamp(v, 0L, 255L))];
  }
  return hist;
}

std::optional<int> otsu_threshold(std::span<const std::int64_t, 256> histogram) {
  std::int64_t total = 0;
  double sum_all = 0;
  int populated = 0;
  for (int i = 0; i < 256; ++i) {
    total += histogram[i];
    sum_all += static_cast<double>(i) * histogram[i];
    populated += histogram[i] > 0;
  }
  if (populated < 2) return std::nullopt;

  double best_var = -1;
  int best_t = 0;
  std::int64_t w0 = 0;
  double sum0 = 0;
  for (int t = 0; t < 255; ++t) {
    w0 += histogram[t];
    sum0 += static_cast<double>(t) * histogram[t];
    const std::int64_t w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double var = static_cast<double>(w0) * static_cast<double>(w1) * (m0 - m1) * (m0 - m1);
    if (var > best_var) {
      best_var = var;
      best_t = t;
    }
  }
  return best_t;
}

namespace {

std::vector<std::uint8_t> dilate(const std::vector<std::uint8_t>& in, int w, int h) {
  std::vector<std::uint8_t> out(in.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = 0;
      for (int dy = -1; dy <= 1 && !v; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
          if (in[static_cast<std::size_t>(yy) * w + xx]) {
            v = 1;
            break;
          }
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = v;
    }
  }
  return out;
}

std::vector<std::uint8_t> erode(const std::vector<std::uint8_t>& in, int w, int h) {
  std::vector<std::uint8_t> out(in.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = 1;
      for (int dy = -1; dy <= 1 && v; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
          if (!in[static_cast<std::size_t>(yy) * w + xx]) {
            v = 0;
            break;
          }
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = v;
    }
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> morphological_close(std::vector<std::uint8_t> bits,
                                              int width, int height, int iters) {
  for (int i = 0; i < iters; ++i) bits = dilate(bits, width, height);
  for (int i = 0; i < iters; ++i) bits = erode(bits, width, height);
  return bits;
}

std::vector<std::uint8_t> remove_small_components(std::vector<std::uint8_t> bits,
                                                  int width, int height, int min_px) {
  if (min_px <= 1) return bits;
  std::vector<std::int32_t> label(bits.size(), -1);
  std::vector<std::size_t> stack;
  std::vector<std::size_t> members;
  for (std::size_t start = 0; start < bits.size(); ++start) {
    if (!bits[start] || label[start] >= 0) continue;
    members.clear();
    stack.push_back(start);
    label[start] = 1;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      members.push_back(p);
      const int px = static_cast<int>(p % width), py = static_cast<int>(p / width);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = px + dx, yy = py + dy;
          if (xx < 0 || yy < 0 || xx >= width || yy >= height) continue;
          const std::size_t q = static_cast<std::size_t>(yy) * width + xx;
          if (bits[q] && label[q] < 0) {
            label[q] = 1;
            stack.push_back(q);
          }
        }
      }
    }
    if (static_cast<int>(members.size()) < min_px) {
      for (auto p : members) bits[p] = 0;
    }
  }
  return bits;
}

TissueMask segment_tissue(const Level& level, const SegParams& params) {
  const RgbImage& image = level.pixels();
  const auto hist = luminance_histogram(image);
  const auto otsu = otsu_threshold(hist);
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  if (!otsu) {
    return TissueMask(level.magnification(), image.width, image.height,
                      std::vector<std::uint8_t>(n, 0), /*no_tissue=*/true);
  }
  const double threshold = std::clamp(static_cast<double>(*otsu), params.t_lo, params.t_hi);

  std::vector<std::uint8_t> bits(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    // Tissue is darker than the glass background.
    bits[i] = std::lround(luminance(image.data.data() + 3 * i)) <= threshold ? 1 : 0;
  }
  bits = morphological_close(std::move(bits), image.width, image.height, params.close_iters);
  bits = remove_small_components(std::move(bits), image.width, image.height,
                                 params.min_component_px);
  bool any = std::any_of(bits.begin(), bits.end(), [](auto b) { return b != 0; });
  return TissueMask(level.magnification(), image.width, image.height, std::move(bits), !any);
}

std::optional<TissueMask> load_mask_override(const SlidePyramid& slide, const Level& level) {
  if (slide.root().empty()) return std::nullopt;
  const auto path = slide.root() / ("mask_" + format_magnification(level.magnification()) + ".png");
  if (!std::filesystem::exists(path)) return std::nullopt;
  GrayImage gray = read_png_gray(path);
  if (gray.width != level.width() || gray.height != level.height())
    fail(ErrorCode::kDimensionMismatch,
         "mask override " + path.string() + " does not match level size");
  std::vector<std::uint8_t> bits(gray.data.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = gray.data[i] != 0;
  const bool any = std::any_of(bits.begin(), bits.end(), [](auto b) { return b != 0; });
  return TissueMask(level.magnification(), gray.width, gray.height, std::move(bits), !any);
}

double tissue_fraction(const TissueMask& mask, const Region& region) {
  if (region.size_px < 1 || region.x < 0 || region.y < 0 ||
      static_cast<long>(region.x) + region.size_px > mask.width() ||
      static_cast<long>(region.y) + region.size_px > mask.height())
    fail(ErrorCode::kOutOfBounds, "tissue_fraction: region outside mask");
  const double area = static_cast<double>(region.size_px) * region.size_px;
  return static_cast<double>(mask.count(region.x, region.y, region.size_px, region.size_px)) / area;
}

}  // namespace bob
