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

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bob/image.hpp"

namespace bob {

// Lowercase, punctuation replaced by spaces, whitespace collapsed and trimmed.
std::string normalize_label(std::string_view text);

struct SlideLabels {
  std::optional<std::string> primary_site;
  std::optional<std::string> primary_diagnosis;

  // Builds labels from raw text, normalizing each present field. Empty text
  // after normalization counts as absent.
  static SlideLabels from_raw(std::optional<std::string> site,
                              std::optional<std::string> diagnosis);

  bool operator==(const SlideLabels&) const = default;
};

// One pyramid level. Pixels come either from a PNG file (decoded on first
// access, thread-safe) or from an in-memory raster.
class Level {
 public:
  Level(double magnification, std::filesystem::path file, int width,
        int height);
  Level(double magnification, RgbImage pixels);

  double magnification() const { return magnification_; }
  int width() const { return width_; }
  int height() const { return height_; }
  const std::filesystem::path& file() const { return file_; }

  const RgbImage& pixels() const;

 private:
  struct Cache {
    std::once_flag once;
    RgbImage image;
  };

  double magnification_;
  int width_;
  int height_;
  std::filesystem::path file_;
  std::shared_ptr<Cache> cache_;
};

class SlidePyramid {
 public:
  // Validates level ordering, count and geometry; throws on violation.
  SlidePyramid(std::string slide_id, SlideLabels labels,
               std::vector<Level> levels,
               std::filesystem::path root = {});

  const std::string& slide_id() const { return slide_id_; }
  const SlideLabels& labels() const { return labels_; }
  const std::vector<Level>& levels() const { return levels_; }
  const std::filesystem::path& root() const { return root_; }

  // Lowest-magnification level; used for thumbnails.
  const Level& thumbnail_level() const { return levels_.back(); }

 private:
  std::string slide_id_;
  SlideLabels labels_;
  std::vector<Level> levels_;
  std::filesystem::path root_;
};

struct Region {
  double level_magnification = 0;
  int x = 0;
  int y = 0;
  int size_px = 0;
};

// Maximum per-dimension deviation accepted between declared and actual
// level sizes, and between a level and its magnification-scaled level 0.
inline constexpr int kGeometryTolerancePx = 1;

SlidePyramid open_slide(const std::filesystem::path& path);

// Nearest magnification; ties go to the higher magnification.
const Level& select_magnification(const SlidePyramid& slide, double target);

// Pixel-exact copy of the resolved level; throws kOutOfBounds.
RgbImage read_region(const SlidePyramid& slide, const Region& region);
RgbImage read_region(const Level& level, int x, int y, int size_px);

// Writes manifest.json and one PNG per level under `dir`.
void write_slide(const std::filesystem::path& dir, const std::string& slide_id,
                 const SlideLabels& labels,
                 const std::vector<std::pair<double, RgbImage>>& levels);

// "5" for 5.0, "1.25" for 1.25; used in file names.
std::string format_magnification(double magnification);

}  // namespace bob
