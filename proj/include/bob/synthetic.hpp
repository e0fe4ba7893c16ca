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

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "bob/image.hpp"

namespace bob {

// Procedural texture family of one class. Tissue pixels are a base stain
// color modulated by oriented stripes, with dark nuclei-like blobs on top.
struct TextureFamily {
  std::array<double, 3> base_rgb{200, 120, 170};
  std::array<double, 3> blob_rgb{90, 40, 120};
  double blob_density = 0.004;  // blob centers per level-0 pixel
  double blob_radius = 3.0;     // level-0 pixels
  double stripe_frequency = 0.05;  // cycles per level-0 pixel
  double stripe_amplitude = 25.0;
  double noise_sigma = 10.0;

  bool operator==(const TextureFamily&) const = default;
};

struct ClassSpec {
  std::string name;  // becomes primary_diagnosis
  std::string site;  // becomes primary_site
  int slides = 0;
  TextureFamily texture;
};

struct CorpusSpec {
  std::vector<ClassSpec> classes;
  double background_fraction = 0.4;
  int width_px = 1280;  // level 0
  int height_px = 1280;
  std::vector<double> magnifications{20.0, 5.0, 1.25};

  // Throws kInvalidArgument on zero classes, zero slides, duplicate class
  // names, non-distinct textures or unusable geometry.
  void validate() const;

  static CorpusSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Classes 0..n-1 with well separated hues, blob densities and stripe
// frequencies.
TextureFamily default_texture(int class_index);

// n_classes x slides_per_class, all on one site unless `sites` is given.
CorpusSpec make_corpus_spec(int n_classes, int slides_per_class,
                            std::vector<std::string> sites = {});

struct GeneratedSlide {
  std::string slide_id;
  std::filesystem::path dir;
  std::string diagnosis;
  std::string site;
  double tissue_fraction = 0;  // ground truth at level 0
};

// Renders one slide's level-0 raster and its ground-truth tissue mask
// (255 = tissue). Deterministic in (family, background_fraction, size, seed).
struct RenderedSlide {
  RgbImage image;
  GrayImage truth;
};
RenderedSlide render_slide(const TextureFamily& family,
                           double background_fraction, int width, int height,
                           std::uint64_t seed);

// Writes every slide under `out_dir/<slide_id>/` plus `corpus.json` and
// a recommended `indexing.json`. Same (spec, seed) gives identical bytes.
std::vector<GeneratedSlide> generate_synthetic_corpus(
    const CorpusSpec& spec, std::uint64_t seed,
    const std::filesystem::path& out_dir);

}  // namespace bob
