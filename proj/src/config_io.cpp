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

#include "bob/config_io.hpp"

#include <fstream>

#include "bob/error.hpp"

namespace bob {

using nlohmann::json;

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& field) {
  if (j.contains(key)) j.at(key).get_to(field);
}

}  // namespace

void to_json(json& j, const KMeansParams& p) {
  j = json{{"max_iters", p.max_iters}, {"rel_tol", p.rel_tol}, {"seed", p.seed}};
}

void from_json(const json& j, KMeansParams& p) {
  read_opt(j, "max_iters", p.max_iters);
  read_opt(j, "rel_tol", p.rel_tol);
  read_opt(j, "seed", p.seed);
}

void to_json(json& j, const SegParams& p) {
  j = json{{"t_lo", p.t_lo},
           {"t_hi", p.t_hi},
           {"close_iters", p.close_iters},
           {"min_component_px", p.min_component_px}};
}

void from_json(const json& j, SegParams& p) {
  read_opt(j, "t_lo", p.t_lo);
  read_opt(j, "t_hi", p.t_hi);
  read_opt(j, "close_iters", p.close_iters);
  read_opt(j, "min_component_px", p.min_component_px);
}

void to_json(json& j, const IndexingConfig& c) {
  j = json{{"k_ch", c.k_ch},
           {"p_m", c.p_m},
           {"m_x_c", c.m_x_c},
           {"m_x_idx", c.m_x_idx},
           {"s_l", c.s_l},
           {"s_h", c.s_h},
           {"hist_bins", c.hist_bins},
           {"tissue_threshold", c.tissue_threshold},
           {"kmeans", c.kmeans},
           {"segmentation", c.segmentation}};
}

void from_json(const json& j, IndexingConfig& c) {
  read_opt(j, "k_ch", c.k_ch);
  read_opt(j, "p_m", c.p_m);
  read_opt(j, "m_x_c", c.m_x_c);
  read_opt(j, "m_x_idx", c.m_x_idx);
  read_opt(j, "s_l", c.s_l);
  read_opt(j, "s_h", c.s_h);
  read_opt(j, "hist_bins", c.hist_bins);
  read_opt(j, "tissue_threshold", c.tissue_threshold);
  read_opt(j, "kmeans", c.kmeans);
  read_opt(j, "segmentation", c.segmentation);
  c.validate();
}

IndexingConfig load_indexing_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kInvalidArgument, "cannot open config " + path.string());
  try {
    return json::parse(in).get<IndexingConfig>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, "bad config " + path.string() + ": " + e.what());
  }
}

}  // namespace bob
