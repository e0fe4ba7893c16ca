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

#include "json.hpp"

#include "bob/index_store.hpp"
#include "bob/search.hpp"

namespace bob {

// Wire forms shared by the CLI and the HTTP service, so both print the same
// bytes for the same in-process result.

SearchMode parse_mode(const std::string& text);
std::string to_string(SearchMode mode);

nlohmann::json labels_json(const SlideLabels& labels);
nlohmann::json slide_summary_json(const IndexedSlide& slide);

// Hits carry labels from the index and a thumbnail link.
nlohmann::json search_result_json(const SearchResult& result, const ScanQuery& query,
                                  const ArchiveIndex& index);
nlohmann::json patch_result_json(const PatchResult& result, const ArchiveIndex& index);

inline std::string thumbnail_url(const std::string& slide_id) {
  return "/slides/" + slide_id + "/thumbnail";
}

}  // namespace bob
