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

#include "bob/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "bob/config_io.hpp"
#include "bob/error.hpp"
#include "bob/parallel.hpp"
#include "bob/random.hpp"
#include "bob/slide_io.hpp"

namespace bob {

using nlohmann::json;

namespace {

constexpr double kBackgroundLevel = 242.0;
constexpr double kBackgroundNoise = 3.0;
constexpr int kFieldBumps = 7;

std::uint8_t clamp_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

std::string slug(const std::string& name) {
  std::string out;
  for (char c : normalize_label(name)) out.push_back(c == ' ' ? '-' : c);
  return out;
}

std::uint64_t slide_seed(std::uint64_t seed, std::size_t cls, int index) {
  // Mix so that neighbouring (class, index) pairs get unrelated streams.
  std::uint64_t x = seed * 0x9E3779B97F4A7C15ull + cls * 0xBF58476D1CE4E5B9ull +
                    static_cast<std::uint64_t>(index) * 0x94D049BB133111EBull;
  x ^= x >> 31;
  x *= 0xD6E8FEB86659FD93ull;
  x ^= x >> 32;
  return x;
}

json texture_to_json(const TextureFamily& t) {
  return json{{"base_rgb", t.base_rgb},
              {"blob_rgb", t.blob_rgb},
              {"blob_density", t.blob_density},
              {"blob_radius", t.blob_radius},
              {"stripe_frequency", t.stripe_frequency},
              {"stripe_amplitude", t.stripe_amplitude},
              {"noise_sigma", t.noise_sigma}};
}

TextureFamily texture_from_json(const json& j, TextureFamily t) {
  if (j.contains("base_rgb")) j["base_rgb"].get_to(t.base_rgb);
  if (j.contains("blob_rgb")) j["blob_rgb"].get_to(t.blob_rgb);
  if (j.contains("blob_density")) j["blob_density"].get_to(t.blob_density);
  if (j.contains("blob_radius")) j["blob_radius"].get_to(t.blob_radius);
  if (j.contains("stripe_frequency")) j["stripe_frequency"].get_to(t.stripe_frequency);
  if (j.contains("stripe_amplitude")) j["stripe_amplitude"].get_to(t.stripe_amplitude);
  if (j.contains("noise_sigma")) j["noise_sigma"].get_to(t.noise_sigma);
  return t;
}

}  // namespace

TextureFamily default_texture(int class_index) {
  static const TextureFamily kPalette[] = {
      {{205, 110, 160}, {80, 30, 110}, 0.002, 3.0, 0.020, 25.0, 10.0},
      {{150, 85, 195}, {55, 20, 85}, 0.008, 2.5, 0.070, 20.0, 10.0},
      {{225, 155, 115}, {120, 55, 60}, 0.0008, 4.0, 0.140, 30.0, 10.0},
      {{140, 150, 205}, {35, 40, 110}, 0.014, 2.0, 0.040, 15.0, 10.0},
  };
  constexpr int kPaletteSize = 4;
  if (class_index < kPaletteSize) return kPalette[class_index];
  // Further classes rotate the palette and shift the texture scales.
  TextureFamily t = kPalette[class_index % kPaletteSize];
  const int round = class_index / kPaletteSize;
  for (int c = 0; c < 3; ++c) {
    t.base_rgb[c] = std::fmod(t.base_rgb[c] + 37.0 * round * (c + 1), 200.0) + 40.0;
  }
  t.blob_density *= 1.0 + 0.5 * round;
  t.stripe_frequency *= 1.0 + 0.3 * round;
  return t;
}

CorpusSpec make_corpus_spec(int n_classes, int slides_per_class,
                            std::vector<std::string> sites) {
  CorpusSpec spec;
  for (int i = 0; i < n_classes; ++i) {
    ClassSpec cls;
    cls.name = "class " + std::string(1, static_cast<char>('a' + i % 26)) +
               (i >= 26 ? std::to_string(i / 26) : "");
    cls.site = sites.empty() ? "synthetic" : sites[static_cast<std::size_t>(i) % sites.size()];
    cls.slides = slides_per_class;
    cls.texture = default_texture(i);
    spec.classes.push_back(cls);
  }
  return spec;
}

void CorpusSpec::validate() const {
  if (classes.empty()) fail(ErrorCode::kInvalidArgument, "corpus spec has zero classes");
  std::set<std::string> names;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const auto& c = classes[i];
    if (c.slides < 1)
      fail(ErrorCode::kInvalidArgument, "class '" + c.name + "' has zero slides");
    if (normalize_label(c.name).empty())
      fail(ErrorCode::kInvalidArgument, "class name must be non-empty");
    if (!names.insert(normalize_label(c.name)).second)
      fail(ErrorCode::kInvalidArgument, "duplicate class '" + c.name + "'");
    for (std::size_t j = 0; j < i; ++j) {
      if (classes[j].texture == c.texture)
        fail(ErrorCode::kInvalidArgument,
             "classes '" + classes[j].name + "' and '" + c.name + "' share a texture family");
    }
  }
  if (!(background_fraction >= 0.0 && background_fraction < 1.0))
    fail(ErrorCode::kInvalidArgument, "background_fraction must be in [0, 1)");
  if (magnifications.size() < 2)
    fail(ErrorCode::kInvalidArgument, "need at least two magnifications");
  for (std::size_t i = 1; i < magnifications.size(); ++i) {
    const double ratio = magnifications[0] / magnifications[i];
    if (!(magnifications[i] > 0) || !(magnifications[i] < magnifications[i - 1]) ||
        std::abs(ratio - std::round(ratio)) > 1e-9)
      fail(ErrorCode::kInvalidArgument,
           "magnifications must decrease and divide the base magnification");
    if (width_px / ratio < 1 || height_px / ratio < 1)
      fail(ErrorCode::kInvalidArgument, "slide too small for magnification ladder");
  }
}

CorpusSpec CorpusSpec::from_json(const json& j) {
  CorpusSpec spec;
  if (j.contains("background_fraction")) j["background_fraction"].get_to(spec.background_fraction);
  if (j.contains("width_px")) j["width_px"].get_to(spec.width_px);
  if (j.contains("height_px")) j["height_px"].get_to(spec.height_px);
  if (j.contains("magnifications")) j["magnifications"].get_to(spec.magnifications);
  int index = 0;
  for (const auto& c : j.at("classes")) {
    ClassSpec cls;
    cls.name = c.at("name").get<std::string>();
    cls.site = c.value("site", std::string("synthetic"));
    cls.slides = c.at("slides").get<int>();
    cls.texture = texture_from_json(c.value("texture", json::object()), default_texture(index));
    spec.classes.push_back(std::move(cls));
    ++index;
  }
  return spec;
}

json CorpusSpec::to_json() const {
  json classes_json = json::array();
  for (const auto& c : classes) {
    classes_json.push_back({{"name", c.name},
                            {"site", c.site},
                            {"slides", c.slides},
                            {"texture", texture_to_json(c.texture)}});
  }
  return json{{"background_fraction", background_fraction},
              {"width_px", width_px},
              {"height_px", height_px},
              {"magnifications", magnifications},
              {"classes", classes_json}};
}

RenderedSlide render_slide(const TextureFamily& family, double background_fraction,
                           int width, int height, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = static_cast<std::size_t>(width) * height;

  // Tissue shape: a smooth random field thresholded at the quantile that
  // leaves exactly `background_fraction` of the pixels as background.
  struct Bump {
    double cx, cy, inv2s2, weight;
  };
  std::vector<Bump> bumps;
  const double scale = std::min(width, height);
  for (int b = 0; b < kFieldBumps; ++b) {
    const double sigma = scale * rng.uniform(0.12, 0.30);
    bumps.push_back({rng.uniform(0, width), rng.uniform(0, height),
                     1.0 / (2 * sigma * sigma), rng.uniform(0.5, 1.0) * (b < 5 ? 1 : -1)});
  }
  // Gaussians separate into row and column factors.
  std::vector<double> field(n, 0.0);
  std::vector<double> fx(static_cast<std::size_t>(width)), fy(static_cast<std::size_t>(height));
  for (const auto& bump : bumps) {
    for (int x = 0; x < width; ++x) fx[x] = std::exp(-(x - bump.cx) * (x - bump.cx) * bump.inv2s2);
    for (int y = 0; y < height; ++y) fy[y] = bump.weight * std::exp(-(y - bump.cy) * (y - bump.cy) * bump.inv2s2);
    for (int y = 0; y < height; ++y) {
      double* row = field.data() + static_cast<std::size_t>(y) * width;
      for (int x = 0; x < width; ++x) row[x] += fy[y] * fx[x];
    }
  }
  const std::size_t n_background =
      static_cast<std::size_t>(std::llround(background_fraction * static_cast<double>(n)));
  double threshold = -std::numeric_limits<double>::infinity();
  if (n_background > 0) {
    std::vector<double> sorted = field;
    std::nth_element(sorted.begin(), sorted.begin() + (n_background - 1), sorted.end());
    threshold = sorted[n_background - 1];
  }

  RenderedSlide out{RgbImage(width, height), GrayImage(width, height)};
  for (std::size_t i = 0; i < n; ++i) out.truth.data[i] = field[i] > threshold ? 255 : 0;

  // Stripes along a random direction.
  const double theta = rng.uniform(0, std::numbers::pi);
  const double phase = rng.uniform(0, 2 * std::numbers::pi);
  const double ux = std::cos(theta), uy = std::sin(theta);
  const double omega = 2 * std::numbers::pi * family.stripe_frequency;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      auto* p = out.image.pixel(x, y);
      if (out.truth.at(x, y)) {
        const double s = family.stripe_amplitude * std::sin(omega * (ux * x + uy * y) + phase);
        for (int c = 0; c < 3; ++c)
          p[c] = clamp_byte(family.base_rgb[c] + s + family.noise_sigma * rng.normal());
      } else {
        const double v = kBackgroundLevel + kBackgroundNoise * rng.normal();
        for (int c = 0; c < 3; ++c) p[c] = clamp_byte(v + 2.0 * (c - 1));
      }
    }
  }

  // Nuclei-like blobs, centered on tissue.
  const double tissue_px = static_cast<double>(n - n_background);
  const auto n_blobs = static_cast<std::size_t>(std::llround(family.blob_density * tissue_px));
  for (std::size_t b = 0; b < n_blobs; ++b) {
    const int cx = static_cast<int>(rng.index(static_cast<std::size_t>(width)));
    const int cy = static_cast<int>(rng.index(static_cast<std::size_t>(height)));
    const double r = family.blob_radius * rng.uniform(0.7, 1.3);
    if (!out.truth.at(cx, cy)) continue;
    const int ri = static_cast<int>(std::ceil(r));
    for (int y = std::max(0, cy - ri); y <= std::min(height - 1, cy + ri); ++y) {
      for (int x = std::max(0, cx - ri); x <= std::min(width - 1, cx + ri); ++x) {
        const double d = std::hypot(x - cx, y - cy);
        if (d > r || !out.truth.at(x, y)) continue;
        const double a = 1.0 - 0.5 * (d / r);
        auto* p = out.image.pixel(x, y);
        for (int c = 0; c < 3; ++c)
          p[c] = clamp_byte((1 - a) * p[c] + a * family.blob_rgb[c]);
      }
    }
  }
  return out;
}

std::vector<GeneratedSlide> generate_synthetic_corpus(const CorpusSpec& spec,
                                                      std::uint64_t seed,
                                                      const std::filesystem::path& out_dir) {
  spec.validate();
  std::filesystem::create_directories(out_dir);
  struct Job {
    std::size_t class_index;
    int slide_index;
  };
  std::vector<Job> jobs;
  for (std::size_t ci = 0; ci < spec.classes.size(); ++ci) {
    for (int i = 0; i < spec.classes[ci].slides; ++i) jobs.push_back({ci, i});
  }

  // Every slide has its own seed and directory, so slides render in parallel
  // and the bytes written do not depend on scheduling.
  std::vector<GeneratedSlide> slides(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t j) {
    const ClassSpec& cls = spec.classes[jobs[j].class_index];
    char suffix[16];
    std::snprintf(suffix, sizeof(suffix), "_%03d", jobs[j].slide_index);
    GeneratedSlide& g = slides[j];
    g.slide_id = slug(cls.name) + suffix;
    g.dir = out_dir / g.slide_id;
    const SlideLabels labels = SlideLabels::from_raw(cls.site, cls.name);
    g.site = labels.primary_site.value_or("");
    g.diagnosis = labels.primary_diagnosis.value_or("");

    RenderedSlide rendered = render_slide(cls.texture, spec.background_fraction, spec.width_px,
                                          spec.height_px,
                                          slide_seed(seed, jobs[j].class_index, jobs[j].slide_index));
    std::size_t tissue = 0;
    for (auto v : rendered.truth.data) tissue += v != 0;
    g.tissue_fraction = static_cast<double>(tissue) / rendered.truth.data.size();

    std::vector<std::pair<double, RgbImage>> levels;
    for (std::size_t li = 1; li < spec.magnifications.size(); ++li) {
      const int factor =
          static_cast<int>(std::lround(spec.magnifications[0] / spec.magnifications[li]));
      levels.emplace_back(spec.magnifications[li], downsample(rendered.image, factor));
    }
    levels.insert(levels.begin(), {spec.magnifications[0], std::move(rendered.image)});
    write_slide(g.dir, g.slide_id, labels, levels);
  });

  json listing = json::array();
  for (const auto& g : slides) {
    listing.push_back({{"slide_id", g.slide_id},
                       {"primary_site", g.site},
                       {"primary_diagnosis", g.diagnosis},
                       {"tissue_fraction", g.tissue_fraction}});
  }

  json corpus{{"seed", seed}, {"spec", spec.to_json()}, {"slides", listing}};
  std::ofstream(out_dir / "corpus.json", std::ios::binary) << corpus.dump(2) << '\n';

  // Recommended indexing config: cluster at the second level, index at the
  // base, with patch sides scaled to the synthetic slide size.
  IndexingConfig cfg;
  cfg.m_x_idx = spec.magnifications[0];
  cfg.m_x_c = spec.magnifications[1];
  cfg.s_l = 16;
  cfg.s_h = static_cast<int>(std::lround(cfg.s_l * cfg.m_x_idx / cfg.m_x_c));
  cfg.segmentation.min_component_px = 16;
  std::ofstream(out_dir / "indexing.json", std::ios::binary) << json(cfg).dump(2) << '\n';
  return slides;
}

}  // namespace bob
