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

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bob/image.hpp"
#include "bob/kmeans.hpp"
#include "bob/slide_io.hpp"
#include "bob/tissue.hpp"

namespace bob {

struct IndexingConfig {
  int k_ch = 9;             // color clusters
  double p_m = 0.05;        // mosaic fraction per color cluster
  double m_x_c = 5.0;       // clustering magnification
  double m_x_idx = 20.0;    // indexing magnification
  int s_l = 250;            // patch side at m_x_c
  int s_h = 1000;           // patch side at m_x_idx
  int hist_bins = 8;        // per channel
  double tissue_threshold = 0.5;
  KMeansParams kmeans;
  SegParams segmentation;

  // Throws kInvalidArgument when a field is out of range.
  void validate() const;

  bool operator==(const IndexingConfig&) const = default;
};

struct PatchRef {
  std::string slide_id;
  int grid_x = 0;
  int grid_y = 0;
  int origin_x = 0;  // pixels at m_x_c, = grid_x * s_l
  int origin_y = 0;
  int color_cluster = 0;

  bool operator==(const PatchRef&) const = default;
};

struct PatchGrid {
  std::vector<PatchRef> patches;  // row-major (grid_y, grid_x) order
  bool no_patches = false;        // s_l exceeds the level
};

struct Mosaic {
  std::string slide_id;
  std::vector<PatchRef> patches;  // sorted by (grid_y, grid_x)
  IndexingConfig config;
  int tissue_patch_count = 0;               // |P_T|
  std::vector<int> color_cluster_sizes;     // |C_i|, length k_ch
};

// Non-overlapping s_l x s_l grid over the level; partial edge patches are
// dropped, and only patches with tissue fraction >= threshold are kept.
PatchGrid dense_patch_grid(const Level& level, const TissueMask& mask, int s_l,
                           double tissue_threshold = 0.5,
                           const std::string& slide_id = {});

// Per-channel histograms with `bins` uniform bins over [0, 255],
// concatenated R, G, B; each channel sums to 1.
Eigen::VectorXd rgb_histogram(const RgbImage& patch, int bins);

// Number of spatial clusters drawn from a color cluster of `size` patches:
// max(1, round(p_m * size)), rounding half away from zero.
int mosaic_quota(double p_m, int size);

Mosaic build_mosaic(const SlidePyramid& slide, const TissueMask& mask,
                    const IndexingConfig& cfg);

}  // namespace bob
