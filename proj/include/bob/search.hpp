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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bob/barcode.hpp"
#include "bob/index_store.hpp"

namespace bob {

enum class SearchMode { kHorizontal, kVertical };

// Horizontal searches the whole archive; vertical is confined to one site.
struct ModeFilter {
  SearchMode mode = SearchMode::kHorizontal;
  std::string site;

  static ModeFilter horizontal() { return {}; }
  static ModeFilter vertical(std::string site) {
    return {SearchMode::kVertical, std::move(site)};
  }
};

// For every query barcode, the minimum Hamming distance to the target bunch.
std::vector<std::size_t> min_distances(const BunchOfBarcodes& query,
                                       const BunchOfBarcodes& target);

// Lower median of the per-barcode minima. Not symmetric in its arguments.
std::size_t scan_distance(const BunchOfBarcodes& query,
                          const BunchOfBarcodes& target);

struct ScanQuery {
  BunchOfBarcodes query;  // slide_id is excluded from the candidates
  ModeFilter filter;
  int k = 10;
  double mosaic_fraction = 1.0;
  std::uint64_t seed = 0;  // subsample seed, used when fraction < 1

  static ScanQuery from_slide(const IndexedSlide& slide, ModeFilter filter,
                              int k);
};

struct ScanHit {
  std::string slide_id;
  std::size_t distance = 0;
};

struct SearchResult {
  std::string query_id;
  std::vector<ScanHit> ranked;  // ascending distance, ties by slide_id
  std::size_t query_barcodes_used = 0;
};

// Uniform subsample without replacement of max(1, round(fraction * n))
// entries, in their original order.
BunchOfBarcodes subsample_bunch(const BunchOfBarcodes& bunch, double fraction,
                                std::uint64_t seed);

// Exhaustive ranking; throws kEmptyCandidates when the mode filter leaves
// nothing but the query.
SearchResult scan_knn(const ScanQuery& query, const ArchiveIndex& index);

struct PatchHit {
  std::string slide_id;
  PatchRef patch;
  std::size_t distance = 0;
};

struct PatchResult {
  std::vector<PatchHit> ranked;  // ascending, ties by (slide_id, gy, gx)
};

PatchResult patch_knn(const Barcode& query, const ArchiveIndex& index, int k,
                      const ModeFilter& filter = {});

struct VoteResult {
  std::string label;
  std::vector<ScanHit> neighbors;
  std::map<std::string, int> votes;
  bool unanimous = false;
  bool partial = false;  // fewer than 5 candidates voted
};

inline constexpr int kVoteNeighbors = 5;

// Modal primary diagnosis among the top five vertical results. Ties go to
// the label with the smallest distance sum, then lexicographically.
VoteResult classify_by_vote(const IndexedSlide& query,
                            const ArchiveIndex& index, const std::string& site);

// Vote over already-ranked neighbors with known labels; exposed for testing.
VoteResult vote(const std::vector<ScanHit>& neighbors,
                const std::vector<std::string>& labels);

}  // namespace bob
