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

#include <set>

#include "doctest.h"

#include "bob/error.hpp"
#include "bob/mosaic.hpp"
#include "bob/random.hpp"
#include "test_support.hpp"

using namespace bob;

namespace {

TissueMask full_mask(const Level& level, std::uint8_t v = 1) {
  return TissueMask(level.magnification(), level.width(), level.height(),
                    std::vector<std::uint8_t>(static_cast<std::size_t>(level.width()) * level.height(), v));
}

// Slide whose 5x level is a grid of s x s patches with random palette
// colors, so the colour clustering has real structure.
SlidePyramid patchwork_slide(int cols, int rows, int s, std::uint64_t seed) {
  Rng rng(seed);
  const std::uint8_t palette[12][3] = {{200, 40, 40},  {40, 200, 40},  {40, 40, 200},  {200, 200, 40},
                                       {200, 40, 200}, {40, 200, 200}, {120, 60, 30},  {30, 120, 60},
                                       {60, 30, 120},  {230, 150, 90}, {90, 230, 150}, {150, 90, 230}};
  RgbImage low(cols * s, rows * s);
  for (int gy = 0; gy < rows; ++gy)
    for (int gx = 0; gx < cols; ++gx) {
      const auto* c = palette[rng.index(12)];
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
          auto* p = low.pixel(gx * s + x, gy * s + y);
          for (int ch = 0; ch < 3; ++ch)
            p[ch] = static_cast<std::uint8_t>(std::clamp(c[ch] + 8 * rng.normal(), 0.0, 255.0));
        }
    }
  std::vector<Level> levels;
  levels.emplace_back(20.0, RgbImage(low.width * 4, low.height * 4, 128));
  levels.emplace_back(5.0, low);
  return SlidePyramid("patchwork", {}, std::move(levels));
}

int expected_size(const Mosaic& m) {
  int total = 0;
  for (int c : m.color_cluster_sizes) {
    if (c > 0) total += std::max(1, static_cast<int>(std::lround(m.config.p_m * c)));
  }
  return total;
}

}  // namespace

TEST_CASE("dense grid counts follow floor division") {
  const Level l1000(5.0, RgbImage(1000, 1000));
  CHECK(dense_patch_grid(l1000, full_mask(l1000), 250).patches.size() == 16);
  CHECK(dense_patch_grid(l1000, full_mask(l1000, 0), 250).patches.empty());
  const Level l999(5.0, RgbImage(999, 1000));
  const auto g = dense_patch_grid(l999, full_mask(l999), 250);
  CHECK(g.patches.size() == 12);
  for (const auto& p : g.patches) {
    CHECK(p.origin_x == p.grid_x * 250);
    CHECK(p.origin_y == p.grid_y * 250);
    CHECK(p.grid_x < 3);
  }
  const auto none = dense_patch_grid(l999, full_mask(l999), 1001);
  CHECK(none.no_patches);
  CHECK(none.patches.empty());
}

TEST_CASE("patches need at least half tissue") {
  const Level level(5.0, RgbImage(4, 2));
  std::vector<std::uint8_t> bits{1, 1, 1, 0,  //
                                 0, 0, 0, 0};
  const TissueMask mask(5.0, 4, 2, bits);
  const auto g = dense_patch_grid(level, mask, 2);
  REQUIRE(g.patches.size() == 1);  // left patch 2/4 tissue, right patch 1/4
  CHECK(g.patches[0].grid_x == 0);
  CHECK_THROWS_AS(dense_patch_grid(Level(5.0, RgbImage(5, 2)), mask, 2), Error);
}

TEST_CASE("rgb histograms") {
  auto h = rgb_histogram(RgbImage(10, 10, 0), 8);
  CHECK(h.size() == 24);
  for (int c = 0; c < 3; ++c) {
    CHECK(h(c * 8) == 1.0);
    CHECK(h.segment(c * 8 + 1, 7).sum() == 0.0);
  }
  h = rgb_histogram(RgbImage(10, 10, 255), 8);
  for (int c = 0; c < 3; ++c) CHECK(h(c * 8 + 7) == 1.0);
  RgbImage half(10, 10, 0);
  for (int y = 0; y < 10; ++y)
    for (int x = 5; x < 10; ++x) std::fill_n(half.pixel(x, y), 3, std::uint8_t{255});
  h = rgb_histogram(half, 8);
  for (int c = 0; c < 3; ++c) {
    CHECK(h(c * 8) == 0.5);
    CHECK(h(c * 8 + 7) == 0.5);
    CHECK(h.segment(c * 8, 8).sum() == doctest::Approx(1.0));
  }
}

TEST_CASE("quota rounds half away from zero with a floor of one") {
  CHECK(mosaic_quota(0.05, 1) == 1);
  CHECK(mosaic_quota(0.05, 29) == 1);
  CHECK(mosaic_quota(0.05, 30) == 2);  // 1.5 rounds up
  CHECK(mosaic_quota(0.05, 50) == 3);  // 2.5 rounds up
  CHECK(mosaic_quota(0.05, 400) == 20);
  CHECK(mosaic_quota(0.05, 0) == 0);
}

TEST_CASE("400 tissue patches give a mosaic obeying the size law") {
  const SlidePyramid slide = patchwork_slide(20, 20, 16, 1);
  const Level& low = slide.levels()[1];
  IndexingConfig cfg = testing::synthetic_config();
  const Mosaic m = build_mosaic(slide, full_mask(low), cfg);
  CHECK(m.tissue_patch_count == 400);
  const int size = static_cast<int>(m.patches.size());
  CHECK(size == expected_size(m));
  CHECK(size >= 9);
  CHECK(size <= 29);
  CHECK(static_cast<double>(size) / m.tissue_patch_count <= 0.10);

  std::set<std::pair<int, int>> coords;
  for (const auto& p : m.patches) coords.insert({p.grid_x, p.grid_y});
  CHECK(coords.size() == m.patches.size());

  // Each colour cluster contributes exactly its quota.
  for (int c = 0; c < cfg.k_ch; ++c) {
    const int got = static_cast<int>(std::count_if(m.patches.begin(), m.patches.end(),
                                                   [&](const PatchRef& p) { return p.color_cluster == c; }));
    CHECK(got == mosaic_quota(cfg.p_m, m.color_cluster_sizes[c]));
  }

  // Colour labels agree with clustering the histograms directly.
  PointMatrix<double> hist(400, 24);
  const auto grid = dense_patch_grid(low, full_mask(low), cfg.s_l, 0.5);
  for (int i = 0; i < 400; ++i)
    hist.row(i) = rgb_histogram(read_region(low, grid.patches[i].origin_x, grid.patches[i].origin_y, 16), 8).transpose();
  const auto km = kmeans<double>(hist, cfg.k_ch, cfg.kmeans);
  for (const auto& p : m.patches) CHECK(p.color_cluster == km.assignments[p.grid_y * 20 + p.grid_x]);

  CHECK(build_mosaic(slide, full_mask(low), cfg).patches == m.patches);
}

TEST_CASE("five tissue patches are all kept") {
  const SlidePyramid slide = patchwork_slide(8, 8, 16, 2);
  const Level& low = slide.levels()[1];
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(low.width()) * low.height(), 0);
  const std::pair<int, int> cells[5] = {{0, 0}, {3, 1}, {7, 7}, {2, 5}, {6, 2}};
  for (auto [gx, gy] : cells)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) bits[(gy * 16 + y) * low.width() + gx * 16 + x] = 1;
  const Mosaic m = build_mosaic(slide, TissueMask(5.0, low.width(), low.height(), bits), testing::synthetic_config());
  CHECK(m.tissue_patch_count == 5);
  CHECK(m.patches.size() == 5);
  std::set<int> clusters;
  for (const auto& p : m.patches) clusters.insert(p.color_cluster);
  CHECK(clusters.size() == 5);
}

TEST_CASE("spatial selection spreads picks across a uniform cluster") {
  // One flat colour: a single colour cluster of 400 patches, quota 20.
  std::vector<Level> levels;
  levels.emplace_back(20.0, RgbImage(1280, 1280, 100));
  levels.emplace_back(5.0, RgbImage(320, 320, 100));
  const SlidePyramid slide("flat", {}, std::move(levels));
  IndexingConfig cfg = testing::synthetic_config();
  cfg.k_ch = 1;
  const Mosaic m = build_mosaic(slide, full_mask(slide.levels()[1]), cfg);
  REQUIRE(m.patches.size() == 20);
  std::set<int> rows, cols;
  for (const auto& p : m.patches) {
    rows.insert(p.grid_y);
    cols.insert(p.grid_x);
  }
  CHECK(rows.size() >= 4);
  CHECK(cols.size() >= 4);
}

TEST_CASE("a slide without tissue patches is an empty slide") {
  const SlidePyramid slide = patchwork_slide(4, 4, 16, 3);
  try {
    build_mosaic(slide, full_mask(slide.levels()[1], 0), testing::synthetic_config());
    FAIL("expected empty slide");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptySlide);
  }
}

TEST_CASE("default configuration values") {
  const IndexingConfig cfg;
  CHECK(cfg.k_ch == 9);
  CHECK(cfg.p_m == 0.05);
  CHECK(cfg.m_x_c == 5.0);
  CHECK(cfg.m_x_idx == 20.0);
  CHECK(cfg.s_l == 250);
  CHECK(cfg.s_h == 1000);
  IndexingConfig bad;
  bad.p_m = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}
