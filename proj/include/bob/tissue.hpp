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

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "bob/image.hpp"
#include "bob/slide_io.hpp"

namespace bob {

struct SegParams {
  // Otsu's threshold is clamped into [t_lo, t_hi] (luminance, 0..255).
  double t_lo = 0.0;
  double t_hi = 255.0;
  int close_iters = 1;
  int min_component_px = 32;

  bool operator==(const SegParams&) const = default;
};

// Binary tissue mask with a summed-area table, so region fractions and the
// global fraction are O(1).
class TissueMask {
 public:
  TissueMask(double magnification, int width, int height,
             std::vector<std::uint8_t> bits, bool no_tissue = false);

  double magnification() const { return magnification_; }
  int width() const { return width_; }
  int height() const { return height_; }
  bool no_tissue() const { return no_tissue_; }

  bool at(int x, int y) const {
    return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  // Count of true pixels in [x, x+w) x [y, y+h); bounds are not checked.
  std::int64_t count(int x, int y, int w, int h) const;
  double fraction() const;

  bool operator==(const TissueMask& o) const {
    return magnification_ == o.magnification_ && width_ == o.width_ &&
           height_ == o.height_ && bits_ == o.bits_;
  }

 private:
  double magnification_;
  int width_;
  int height_;
  bool no_tissue_;
  std::vector<std::uint8_t> bits_;
  std::vector<std::int64_t> integral_;  // (w+1) x (h+1)
};

// 256-bin histogram of rounded luminance values.
std::array<std::int64_t, 256> luminance_histogram(const RgbImage& image);

// Otsu threshold t on a 256-bin histogram: values <= t form the lower class.
// Returns nullopt when only one gray level is populated.
std::optional<int> otsu_threshold(std::span<const std::int64_t, 256> histogram);

// 3x3 dilation followed by 3x3 erosion, `iters` times each. Pixels outside
// the image count as background for dilation and as foreground for erosion,
// so closing never removes a true pixel.
std::vector<std::uint8_t> morphological_close(std::vector<std::uint8_t> bits,
                                              int width, int height, int iters);

// Clears 8-connected components with fewer than `min_px` pixels.
std::vector<std::uint8_t> remove_small_components(
    std::vector<std::uint8_t> bits, int width, int height, int min_px);

TissueMask segment_tissue(const Level& level, const SegParams& params = {});

// If `mask_<mag>.png` exists beside the manifest, loads it (nonzero = tissue).
std::optional<TissueMask> load_mask_override(const SlidePyramid& slide,
                                             const Level& level);

// Fraction of tissue pixels in the region; the region is in mask pixels and
// must lie inside the mask.
double tissue_fraction(const TissueMask& mask, const Region& region);

}  // namespace bob
