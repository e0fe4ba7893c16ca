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

#include "json.hpp"

#include "bob/kmeans.hpp"
#include "bob/mosaic.hpp"
#include "bob/tissue.hpp"

namespace bob {

void to_json(nlohmann::json& j, const KMeansParams& p);
void from_json(const nlohmann::json& j, KMeansParams& p);
void to_json(nlohmann::json& j, const SegParams& p);
void from_json(const nlohmann::json& j, SegParams& p);

// Missing keys keep their defaults; the result is validated.
void to_json(nlohmann::json& j, const IndexingConfig& c);
void from_json(const nlohmann::json& j, IndexingConfig& c);

IndexingConfig load_indexing_config(const std::filesystem::path& path);

}  // namespace bob
