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

#include "bob/mosaic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "bob/error.hpp"
#include "bob/parallel.hpp"

namespace bob {

void IndexingConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::kInvalidArgument, "config: " + what); };
  if (k_ch < 1) bad("k_ch must be >= 1");
  if (!(p_m > 0.0 && p_m <= 1.0)) bad("p_m must be in (0, 1]");
  if (!(m_x_c > 0) || !(m_x_idx > 0)) bad("magnifications must be positive");
  if (s_l < 1 || s_h < 1) bad("patch sizes must be positive");
  if (hist_bins < 1 || hist_bins > 256) bad("hist_bins must be in [1, 256]");
  if (!(tissue_threshold >= 0.0 && tissue_threshold <= 1.0)) bad("tissue_threshold must be in [0, 1]");
  if (kmeans.max_iters < 1) bad("kmeans.max_iters must be >= 1");
  if (!(kmeans.rel_tol > 0)) bad("kmeans.rel_tol must be > 0");
  if (segmentation.close_iters < 0 || segmentation.min_component_px < 0) bad("bad segmentation params");
}

PatchGrid dense_patch_grid(const Level& level, const TissueMask& mask, int s_l,
                           double tissue_threshold, const std::string& slide_id) {
  if (s_l < 1) fail(ErrorCode::kInvalidArgument, "dense_patch_grid: s_l must be positive");
  if (mask.magnification() != level.magnification() || mask.width() != level.width() ||
      mask.height() != level.height())
    fail(ErrorCode::kDimensionMismatch, "dense_patch_grid: mask does not match level");
  PatchGrid grid;
  const int cols = level.width() / s_l;
  const int rows = level.height() / s_l;
  if (cols == 0 || rows == 0) {
    grid.no_patches = true;
    return grid;
  }
  for (int gy = 0; gy < rows; ++gy) {
    for (int gx = 0; gx < cols; ++gx) {
      const Region region{level.magnification(), gx * s_l, gy * s_l, s_l};
      if (tissue_fraction(mask, region) >= tissue_threshold) {
        grid.patches.push_back({slide_id, gx, gy, gx * s_l, gy * s_l, 0});
      }
    }
  }
  return grid;
}

Eigen::VectorXd rgb_histogram(const RgbImage& patch, int bins) {
  if (bins < 1 || bins > 256) fail(ErrorCode::kInvalidArgument, "rgb_histogram: bad bin count");
  Eigen::VectorXd hist = Eigen::VectorXd::Zero(3 * bins);
  const std::size_t n = static_cast<std::size_t>(patch.width) * patch.height;
  if (n == 0) return hist;
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      const int bin = patch.data[3 * i + c] * bins / 256;
      hist(c * bins + bin) += 1.0;
    }
  }
  return hist / static_cast<double>(n);
}

int mosaic_quota(double p_m, int size) {
  if (size <= 0) return 0;
  // std::round rounds half away from zero.
  return std::max(1, static_cast<int>(std::round(p_m * size)));
}

Mosaic build_mosaic(const SlidePyramid& slide, const TissueMask& mask,
                    const IndexingConfig& cfg) {
  cfg.validate();
  const Level& level = select_magnification(slide, cfg.m_x_c);
  PatchGrid grid = dense_patch_grid(level, mask, cfg.s_l, cfg.tissue_threshold, slide.slide_id());
  std::vector<PatchRef>& tissue = grid.patches;
  if (tissue.empty())
    fail(ErrorCode::kEmptySlide, "empty slide: '" + slide.slide_id() + "' has no tissue patches");

  const Eigen::Index n = static_cast<Eigen::Index>(tissue.size());
  PointMatrix<double> histograms(n, 3 * cfg.hist_bins);
  parallel_for(tissue.size(), [&](std::size_t i) {
    const RgbImage patch = read_region(level, tissue[i].origin_x, tissue[i].origin_y, cfg.s_l);
    histograms.row(static_cast<Eigen::Index>(i)) = rgb_histogram(patch, cfg.hist_bins).transpose();
  });

  const auto color = kmeans<double>(histograms, cfg.k_ch, cfg.kmeans);
  Mosaic mosaic;
  mosaic.slide_id = slide.slide_id();
  mosaic.config = cfg;
  mosaic.tissue_patch_count = static_cast<int>(n);
  mosaic.color_cluster_sizes.assign(static_cast<std::size_t>(cfg.k_ch), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    tissue[i].color_cluster = color.assignments[i];
    ++mosaic.color_cluster_sizes[color.assignments[i]];
  }

  for (int c = 0; c < cfg.k_ch; ++c) {
    std::vector<const PatchRef*> members;
    for (const auto& p : tissue) {
      if (p.color_cluster == c) members.push_back(&p);
    }
    if (members.empty()) continue;

    PointMatrix<double> origins(static_cast<Eigen::Index>(members.size()), 2);
    for (std::size_t i = 0; i < members.size(); ++i) {
      origins(static_cast<Eigen::Index>(i), 0) = members[i]->origin_x;
      origins(static_cast<Eigen::Index>(i), 1) = members[i]->origin_y;
    }
    const int quota = mosaic_quota(cfg.p_m, static_cast<int>(members.size()));
    const auto spatial = kmeans<double>(origins, quota, cfg.kmeans);

    // One patch per spatial cluster: the member nearest the centroid, ties
    // to the lowest (grid_y, grid_x).
    for (int s = 0; s < quota; ++s) {
      const PatchRef* best = nullptr;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < members.size(); ++i) {
        if (spatial.assignments[i] != s) continue;
        const double d = (origins.row(static_cast<Eigen::Index>(i)) - spatial.centroids.row(s)).squaredNorm();
        const PatchRef* p = members[i];
        if (d < best_d || (d == best_d && std::tie(p->grid_y, p->grid_x) <
                                              std::tie(best->grid_y, best->grid_x))) {
          best = p;
          best_d = d;
        }
      }
      if (best) mosaic.patches.push_back(*best);
    }
  }
  std::sort(mosaic.patches.begin(), mosaic.patches.end(), [](const PatchRef& a, const PatchRef& b) {
    return std::tie(a.grid_y, a.grid_x) < std::tie(b.grid_y, b.grid_x);
  });
  return mosaic;
}

}  // namespace bob
