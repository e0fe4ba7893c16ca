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

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "bob/barcode.hpp"
#include "bob/features.hpp"
#include "bob/mosaic.hpp"
#include "bob/slide_io.hpp"

namespace bob {

struct IndexedSlide {
  std::string slide_id;
  SlideLabels labels;
  BunchOfBarcodes bob;  // entries carry the aligned PatchRefs

  bool operator==(const IndexedSlide&) const = default;
};

struct ArchiveIndex {
  IndexingConfig config;
  std::string extractor_id;
  std::size_t barcode_length = 0;
  std::map<std::string, IndexedSlide> entries;

  // Adds a slide, enforcing unique ids and a common barcode length.
  void add(IndexedSlide slide);
  const IndexedSlide* find(const std::string& slide_id) const;
  std::size_t barcode_count() const;

  bool operator==(const ArchiveIndex&) const = default;
};

// Top-left of the s_h window at the indexing level for a patch whose origin
// is given at the clustering level: the scaled patch center minus s_h / 2,
// clamped so the window fits. `clamped` reports whether clamping occurred.
struct WindowPlacement {
  int x = 0;
  int y = 0;
  bool clamped = false;
};
WindowPlacement map_to_index_level(const PatchRef& patch, int s_l, int s_h,
                                   double clustering_mag, double indexing_mag,
                                   int level_width, int level_height);

// Segment, build the mosaic, then extract and binarize one feature vector
// per mosaic patch. Uses a mask override file when one is present.
IndexedSlide index_slide(const SlidePyramid& slide, const IndexingConfig& cfg,
                         const FeatureExtractor& extractor);

// Indexes every slide directory (one containing manifest.json) directly
// under `corpus_dir`, in sorted order. Slides are processed in parallel.
ArchiveIndex index_corpus(const std::filesystem::path& corpus_dir,
                          const IndexingConfig& cfg,
                          const FeatureExtractor& extractor);

std::vector<std::filesystem::path> list_slide_dirs(
    const std::filesystem::path& corpus_dir);

inline constexpr char kIndexMagic[4] = {'B', 'O', 'B', '1'};
inline constexpr std::uint32_t kIndexVersion = 1;

// Binary layout documented in docs/index-format.md.
std::vector<std::uint8_t> serialize_index(const ArchiveIndex& index);
ArchiveIndex deserialize_index(const std::vector<std::uint8_t>& bytes);

// Writes to a temporary sibling, then renames, so readers never see a
// partial file.
void save_index(const ArchiveIndex& index, const std::filesystem::path& path);
ArchiveIndex load_index(const std::filesystem::path& path);

// Slide ids whose normalized primary site equals the normalized query.
std::vector<std::string> filter_by_site(const ArchiveIndex& index,
                                        const std::string& site);

}  // namespace bob
