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

#include "bob/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "bob/error.hpp"
#include "bob/parallel.hpp"
#include "bob/random.hpp"

namespace bob {

namespace {

void check_compatible(const BunchOfBarcodes& q, const BunchOfBarcodes& t) {
  q.validate();
  t.validate();
  if (q.barcode_length() != t.barcode_length())
    fail(ErrorCode::kLengthMismatch, "scan distance: barcode lengths differ");
}

std::vector<const IndexedSlide*> candidates(const ArchiveIndex& index, const ModeFilter& filter) {
  std::vector<const IndexedSlide*> out;
  if (filter.mode == SearchMode::kHorizontal) {
    for (const auto& [id, slide] : index.entries) out.push_back(&slide);
  } else {
    if (normalize_label(filter.site).empty())
      fail(ErrorCode::kInvalidArgument, "vertical search needs a site");
    for (const auto& id : filter_by_site(index, filter.site)) out.push_back(index.find(id));
  }
  return out;
}

}  // namespace

std::vector<std::size_t> min_distances(const BunchOfBarcodes& query, const BunchOfBarcodes& target) {
  check_compatible(query, target);
  std::vector<std::size_t> minima;
  minima.reserve(query.entries.size());
  for (const auto& q : query.entries) {
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (const auto& t : target.entries) {
      best = std::min(best, hamming_unchecked(q.barcode, t.barcode));
      if (best == 0) break;
    }
    minima.push_back(best);
  }
  return minima;
}

std::size_t scan_distance(const BunchOfBarcodes& query, const BunchOfBarcodes& target) {
  std::vector<std::size_t> minima = min_distances(query, target);
  // Lower median: an attained value for even counts.
  const std::size_t mid = (minima.size() - 1) / 2;
  std::nth_element(minima.begin(), minima.begin() + static_cast<std::ptrdiff_t>(mid), minima.end());
  return minima[mid];
}

ScanQuery ScanQuery::from_slide(const IndexedSlide& slide, ModeFilter filter, int k) {
  ScanQuery q;
  q.query = slide.bob;
  q.filter = std::move(filter);
  q.k = k;
  return q;
}

BunchOfBarcodes subsample_bunch(const BunchOfBarcodes& bunch, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    fail(ErrorCode::kInvalidArgument, "mosaic fraction must be in (0, 1]");
  if (fraction >= 1.0 || bunch.entries.empty()) return bunch;
  const std::size_t n = bunch.entries.size();
  const std::size_t m = std::max<std::size_t>(1, static_cast<std::size_t>(std::round(fraction * static_cast<double>(n))));
  Rng rng(seed);
  std::vector<std::size_t> picked = rng.sample_without_replacement(n, m);
  std::sort(picked.begin(), picked.end());
  BunchOfBarcodes out;
  out.slide_id = bunch.slide_id;
  for (auto i : picked) out.entries.push_back(bunch.entries[i]);
  return out;
}

SearchResult scan_knn(const ScanQuery& query, const ArchiveIndex& index) {
  if (query.k < 1) fail(ErrorCode::kInvalidArgument, "k must be >= 1");
  const BunchOfBarcodes q = subsample_bunch(query.query, query.mosaic_fraction, query.seed);
  q.validate();
  if (!index.entries.empty() && q.barcode_length() != index.barcode_length)
    fail(ErrorCode::kLengthMismatch, "query barcode length does not match the index");

  std::vector<const IndexedSlide*> pool;
  for (const IndexedSlide* s : candidates(index, query.filter)) {
    if (s->slide_id != q.slide_id) pool.push_back(s);
  }
  if (pool.empty())
    fail(ErrorCode::kEmptyCandidates, "no candidate slides for query '" + q.slide_id + "'");

  std::vector<ScanHit> hits(pool.size());
  parallel_for(pool.size(), [&](std::size_t i) {
    hits[i] = {pool[i]->slide_id, scan_distance(q, pool[i]->bob)};
  });
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(query.k), hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(),
                    [](const ScanHit& a, const ScanHit& b) {
                      return std::tie(a.distance, a.slide_id) < std::tie(b.distance, b.slide_id);
                    });
  hits.resize(k);

  SearchResult result;
  result.query_id = q.slide_id;
  result.ranked = std::move(hits);
  result.query_barcodes_used = q.entries.size();
  return result;
}

PatchResult patch_knn(const Barcode& query, const ArchiveIndex& index, int k, const ModeFilter& filter) {
  if (k < 1) fail(ErrorCode::kInvalidArgument, "k must be >= 1");
  if (index.entries.empty()) fail(ErrorCode::kEmptyCandidates, "patch search over an empty index");
  if (query.size() != index.barcode_length)
    fail(ErrorCode::kLengthMismatch, "query barcode length does not match the index");
  std::vector<PatchHit> hits;
  for (const IndexedSlide* s : candidates(index, filter)) {
    for (const auto& e : s->bob.entries) {
      hits.push_back({s->slide_id, e.patch, hamming_unchecked(query, e.barcode)});
    }
  }
  if (hits.empty()) fail(ErrorCode::kEmptyCandidates, "no candidate patches");
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(kk), hits.end(),
                    [](const PatchHit& a, const PatchHit& b) {
                      return std::tie(a.distance, a.slide_id, a.patch.grid_y, a.patch.grid_x) <
                             std::tie(b.distance, b.slide_id, b.patch.grid_y, b.patch.grid_x);
                    });
  hits.resize(kk);
  return PatchResult{std::move(hits)};
}

VoteResult vote(const std::vector<ScanHit>& neighbors, const std::vector<std::string>& labels) {
  if (neighbors.size() != labels.size())
    fail(ErrorCode::kInvalidArgument, "vote: neighbors and labels differ in length");
  VoteResult result;
  result.neighbors = neighbors;
  std::map<std::string, std::size_t> distance_sum;
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    if (labels[i].empty()) continue;
    ++result.votes[labels[i]];
    distance_sum[labels[i]] += neighbors[i].distance;
  }
  if (result.votes.empty()) fail(ErrorCode::kEmptyCandidates, "vote: no labeled neighbors");
  // std::map iterates labels lexicographically, so strict comparisons keep
  // the lexicographically smallest label among full ties.
  const std::string* best = nullptr;
  for (const auto& [label, count] : result.votes) {
    if (!best) {
      best = &label;
      continue;
    }
    const int best_count = result.votes.at(*best);
    if (count > best_count ||
        (count == best_count && distance_sum[label] < distance_sum[*best])) {
      best = &label;
    }
  }
  result.label = *best;
  result.unanimous = result.votes.size() == 1 &&
                     result.votes.begin()->second == static_cast<int>(neighbors.size());
  result.partial = static_cast<int>(neighbors.size()) < kVoteNeighbors;
  return result;
}

VoteResult classify_by_vote(const IndexedSlide& query, const ArchiveIndex& index, const std::string& site) {
  const SearchResult found =
      scan_knn(ScanQuery::from_slide(query, ModeFilter::vertical(site), kVoteNeighbors), index);
  std::vector<std::string> labels;
  for (const auto& hit : found.ranked) {
    labels.push_back(index.find(hit.slide_id)->labels.primary_diagnosis.value_or(""));
  }
  return vote(found.ranked, labels);
}

}  // namespace bob
