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

#include "bob/slide_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "bob/error.hpp"

namespace bob {

using nlohmann::json;

std::string normalize_label(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c) || std::ispunct(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

SlideLabels SlideLabels::from_raw(std::optional<std::string> site,
                                  std::optional<std::string> diagnosis) {
  SlideLabels labels;
  if (site) {
    auto s = normalize_label(*site);
    if (!s.empty()) labels.primary_site = std::move(s);
  }
  if (diagnosis) {
    auto d = normalize_label(*diagnosis);
    if (!d.empty()) labels.primary_diagnosis = std::move(d);
  }
  return labels;
}

Level::Level(double magnification, std::filesystem::path file, int width,
             int height)
    : magnification_(magnification),
      width_(width),
      height_(height),
      file_(std::move(file)),
      cache_(std::make_shared<Cache>()) {
  if (!(magnification > 0) || width < 1 || height < 1)
    fail(ErrorCode::kBadManifest, "level requires magnification > 0 and size >= 1");
}

Level::Level(double magnification, RgbImage pixels)
    : magnification_(magnification),
      width_(pixels.width),
      height_(pixels.height),
      cache_(std::make_shared<Cache>()) {
  if (!(magnification > 0) || width_ < 1 || height_ < 1)
    fail(ErrorCode::kBadManifest, "level requires magnification > 0 and size >= 1");
  std::call_once(cache_->once, [&] { cache_->image = std::move(pixels); });
}

const RgbImage& Level::pixels() const {
  std::call_once(cache_->once, [&] {
    RgbImage image = read_png_rgb(file_);
    if (image.width != width_ || image.height != height_)
      fail(ErrorCode::kDimensionMismatch,
           "level image " + file_.string() + " changed size since open");
    cache_->image = std::move(image);
  });
  return cache_->image;
}

SlidePyramid::SlidePyramid(std::string slide_id, SlideLabels labels,
                           std::vector<Level> levels,
                           std::filesystem::path root)
    : slide_id_(std::move(slide_id)),
      labels_(std::move(labels)),
      levels_(std::move(levels)),
      root_(std::move(root)) {
  if (levels_.size() < 2)
    fail(ErrorCode::kInsufficientPyramid,
         "insufficient pyramid: slide '" + slide_id_ + "' has " +
             std::to_string(levels_.size()) + " level(s), need at least 2");
  const Level& base = levels_.front();
  for (std::size_t i = 1; i < levels_.size(); ++i) {
    const Level& level = levels_[i];
    if (!(level.magnification() < levels_[i - 1].magnification()))
      fail(ErrorCode::kBadManifest,
           "levels of '" + slide_id_ + "' must be in strictly decreasing magnification");
    const double ratio = level.magnification() / base.magnification();
    const double ew = std::round(base.width() * ratio);
    const double eh = std::round(base.height() * ratio);
    if (std::abs(level.width() - ew) > kGeometryTolerancePx ||
        std::abs(level.height() - eh) > kGeometryTolerancePx)
      fail(ErrorCode::kDimensionMismatch,
           "level " + format_magnification(level.magnification()) + "x of '" +
               slide_id_ + "' is " + std::to_string(level.width()) + "x" +
               std::to_string(level.height()) + ", expected about " +
               std::to_string(static_cast<long>(ew)) + "x" +
               std::to_string(static_cast<long>(eh)));
  }
}

SlidePyramid open_slide(const std::filesystem::path& path) {
  const auto manifest_path = path / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) fail(ErrorCode::kMissingManifest, "missing manifest: " + manifest_path.string());

  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kBadManifest, "cannot parse " + manifest_path.string() + ": " + e.what());
  }

  std::string slide_id;
  SlideLabels labels;
  std::vector<Level> levels;
  try {
    slide_id = manifest.at("slide_id").get<std::string>();
    if (manifest.contains("labels")) {
      const auto& l = manifest["labels"];
      auto opt = [&](const char* key) -> std::optional<std::string> {
        if (l.contains(key) && l[key].is_string()) return l[key].get<std::string>();
        return std::nullopt;
      };
      labels = SlideLabels::from_raw(opt("primary_site"), opt("primary_diagnosis"));
    }
    for (const auto& entry : manifest.at("levels")) {
      const double mag = entry.at("magnification").get<double>();
      const int declared_w = entry.at("width_px").get<int>();
      const int declared_h = entry.at("height_px").get<int>();
      const auto file = path / entry.at("file").get<std::string>();
      if (!std::filesystem::exists(file))
        fail(ErrorCode::kBadManifest, "level image missing: " + file.string());
      const PngInfo info = read_png_info(file);
      if (std::abs(info.width - declared_w) > kGeometryTolerancePx ||
          std::abs(info.height - declared_h) > kGeometryTolerancePx)
        fail(ErrorCode::kDimensionMismatch,
             "level image " + file.string() + " is " + std::to_string(info.width) +
                 "x" + std::to_string(info.height) + " but manifest declares " +
                 std::to_string(declared_w) + "x" + std::to_string(declared_h));
      levels.emplace_back(mag, file, info.width, info.height);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kBadManifest, "malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  return SlidePyramid(std::move(slide_id), std::move(labels), std::move(levels), path);
}

const Level& select_magnification(const SlidePyramid& slide, double target) {
  const auto& levels = slide.levels();
  const Level* best = &levels.front();
  double best_gap = std::abs(best->magnification() - target);
  for (const Level& level : levels) {
    const double gap = std::abs(level.magnification() - target);
    if (gap < best_gap ||
        (gap == best_gap && level.magnification() > best->magnification())) {
      best = &level;
      best_gap = gap;
    }
  }
  return *best;
}

RgbImage read_region(const Level& level, int x, int y, int size_px) {
  if (size_px < 1 || x < 0 || y < 0 ||
      static_cast<long>(x) + size_px > level.width() ||
      static_cast<long>(y) + size_px > level.height())
    fail(ErrorCode::kOutOfBounds,
         "region (" + std::to_string(x) + ", " + std::to_string(y) + ") size " +
             std::to_string(size_px) + " exceeds level " +
             std::to_string(level.width()) + "x" + std::to_string(level.height()));
  const RgbImage& src = level.pixels();
  RgbImage out(size_px, size_px);
  const std::size_t row_bytes = static_cast<std::size_t>(size_px) * 3;
  for (int r = 0; r < size_px; ++r) {
    std::copy_n(src.pixel(x, y + r), row_bytes, out.pixel(0, r));
  }
  return out;
}

RgbImage read_region(const SlidePyramid& slide, const Region& region) {
  return read_region(select_magnification(slide, region.level_magnification),
                     region.x, region.y, region.size_px);
}

std::string format_magnification(double magnification) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), magnification);
  return std::string(buf, end);
}

void write_slide(const std::filesystem::path& dir, const std::string& slide_id,
                 const SlideLabels& labels,
                 const std::vector<std::pair<double, RgbImage>>& levels) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["slide_id"] = slide_id;
  json l = json::object();
  if (labels.primary_site) l["primary_site"] = *labels.primary_site;
  if (labels.primary_diagnosis) l["primary_diagnosis"] = *labels.primary_diagnosis;
  manifest["labels"] = l;
  manifest["levels"] = json::array();
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto& [mag, image] = levels[i];
    const std::string file = "level_" + std::to_string(i) + ".png";
    write_png(dir / file, image);
    manifest["levels"].push_back({{"magnification", mag},
                                  {"width_px", image.width},
                                  {"height_px", image.height},
                                  {"file", file}});
  }
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << manifest.dump(2) << '\n';
}

}  // namespace bob
