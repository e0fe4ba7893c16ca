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

#include "bob/json_codec.hpp"

#include "bob/error.hpp"

namespace bob {

using nlohmann::json;

SearchMode parse_mode(const std::string& text) {
  if (text == "horizontal") return SearchMode::kHorizontal;
  if (text == "vertical") return SearchMode::kVertical;
  fail(ErrorCode::kInvalidArgument, "mode must be 'horizontal' or 'vertical', got '" + text + "'");
}

std::string to_string(SearchMode mode) {
  return mode == SearchMode::kVertical ? "vertical" : "horizontal";
}

json labels_json(const SlideLabels& labels) {
  json j = json::object();
  j["primary_site"] = labels.primary_site ? json(*labels.primary_site) : json(nullptr);
  j["primary_diagnosis"] = labels.primary_diagnosis ? json(*labels.primary_diagnosis) : json(nullptr);
  return j;
}

json slide_summary_json(const IndexedSlide& slide) {
  return json{{"slide_id", slide.slide_id},
              {"labels", labels_json(slide.labels)},
              {"barcodes", slide.bob.entries.size()},
              {"thumbnail", thumbnail_url(slide.slide_id)}};
}

json search_result_json(const SearchResult& result, const ScanQuery& query, const ArchiveIndex& index) {
  json ranked = json::array();
  int rank = 1;
  for (const auto& hit : result.ranked) {
    const IndexedSlide* s = index.find(hit.slide_id);
    ranked.push_back({{"rank", rank++},
                      {"slide_id", hit.slide_id},
                      {"distance", hit.distance},
                      {"labels", s ? labels_json(s->labels) : json(nullptr)},
                      {"thumbnail", thumbnail_url(hit.slide_id)}});
  }
  json j{{"query_id", result.query_id},
         {"mode", to_string(query.filter.mode)},
         {"k", query.k},
         {"fraction", query.mosaic_fraction},
         {"query_barcodes_used", result.query_barcodes_used},
         {"ranked", ranked}};
  if (query.filter.mode == SearchMode::kVertical) j["site"] = normalize_label(query.filter.site);
  if (query.mosaic_fraction < 1.0) j["seed"] = query.seed;
  return j;
}

json patch_result_json(const PatchResult& result, const ArchiveIndex& index) {
  json ranked = json::array();
  int rank = 1;
  for (const auto& hit : result.ranked) {
    const IndexedSlide* s = index.find(hit.slide_id);
    ranked.push_back({{"rank", rank++},
                      {"slide_id", hit.slide_id},
                      {"grid_x", hit.patch.grid_x},
                      {"grid_y", hit.patch.grid_y},
                      {"origin_x", hit.patch.origin_x},
                      {"origin_y", hit.patch.origin_y},
                      {"distance", hit.distance},
                      {"labels", s ? labels_json(s->labels) : json(nullptr)},
                      {"thumbnail", thumbnail_url(hit.slide_id)}});
  }
  return json{{"ranked", ranked}};
}

}  // namespace bob
