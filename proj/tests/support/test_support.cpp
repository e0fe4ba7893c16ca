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

#include "test_support.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>

#include <unistd.h>

#include "bob/features.hpp"

namespace bob::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("bob-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

fs::path source_dir() { return BOB_SOURCE_DIR; }
fs::path cli_path() { return BOB_CLI_PATH; }

int run(const std::string& command) {
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string random_bits(Rng& rng, std::size_t bits) {
  std::string s(bits, '0');
  for (auto& c : s) c = (rng.next() & 1) ? '1' : '0';
  return s;
}

Barcode random_barcode(Rng& rng, std::size_t bits) {
  return Barcode::from_string(random_bits(rng, bits));
}

std::size_t naive_hamming(const Barcode& a, const Barcode& b) {
  const std::string sa = a.to_string();
  const std::string sb = b.to_string();
  std::size_t n = 0;
  for (std::size_t i = 0; i < sa.size(); ++i) n += sa[i] != sb[i];
  return n;
}

std::size_t naive_scan_distance(const BunchOfBarcodes& q, const BunchOfBarcodes& t) {
  std::vector<std::size_t> minima;
  for (const auto& qe : q.entries) {
    std::size_t best = SIZE_MAX;
    for (const auto& te : t.entries) best = std::min(best, naive_hamming(qe.barcode, te.barcode));
    minima.push_back(best);
  }
  std::sort(minima.begin(), minima.end());
  return minima[(minima.size() - 1) / 2];
}

BunchOfBarcodes make_bunch(const std::string& slide_id, const std::vector<std::string>& bit_strings) {
  BunchOfBarcodes b;
  b.slide_id = slide_id;
  int i = 0;
  for (const auto& s : bit_strings) {
    BobEntry e;
    e.patch.slide_id = slide_id;
    e.patch.grid_x = i++;
    e.barcode = Barcode::from_string(s);
    b.entries.push_back(std::move(e));
  }
  return b;
}

BunchOfBarcodes random_bunch(Rng& rng, const std::string& slide_id, std::size_t n, std::size_t bits) {
  std::vector<std::string> strings;
  for (std::size_t i = 0; i < n; ++i) strings.push_back(random_bits(rng, bits));
  return make_bunch(slide_id, strings);
}

ArchiveIndex random_index(Rng& rng, std::size_t slides, std::size_t bits, std::size_t max_bunch, int sites,
                          int diagnoses) {
  ArchiveIndex index;
  index.extractor_id = "random";
  index.config.k_ch = 1 + static_cast<int>(rng.index(12));
  index.config.p_m = rng.uniform(0.01, 1.0);
  index.config.s_l = 1 + static_cast<int>(rng.index(300));
  index.config.s_h = 1 + static_cast<int>(rng.index(1200));
  index.config.kmeans.seed = rng.next();
  index.config.kmeans.rel_tol = rng.uniform(1e-6, 1e-2);
  index.config.segmentation.t_lo = rng.uniform(0, 100);
  for (std::size_t s = 0; s < slides; ++s) {
    char id[32];
    std::snprintf(id, sizeof(id), "slide-%03zu", s);
    IndexedSlide slide;
    slide.slide_id = id;
    const int site = static_cast<int>(rng.index(static_cast<std::size_t>(sites) + 1));
    const int diag = static_cast<int>(rng.index(static_cast<std::size_t>(diagnoses) + 1));
    slide.labels = SlideLabels::from_raw(
        site == 0 ? std::nullopt : std::optional<std::string>("site " + std::to_string(site)),
        diag == 0 ? std::nullopt : std::optional<std::string>("diag " + std::to_string(diag)));
    slide.bob = random_bunch(rng, id, 1 + rng.index(max_bunch), bits);
    for (auto& e : slide.bob.entries) {
      e.patch.grid_x = static_cast<int>(rng.index(100));
      e.patch.grid_y = static_cast<int>(rng.index(100));
      e.patch.origin_x = e.patch.grid_x * index.config.s_l;
      e.patch.origin_y = e.patch.grid_y * index.config.s_l;
      e.patch.color_cluster = static_cast<int>(rng.index(static_cast<std::size_t>(index.config.k_ch)));
      e.clamped = rng.next() & 1;
    }
    index.add(std::move(slide));
  }
  return index;
}

CorpusSpec small_corpus_spec(int classes, int per_class, int side) {
  CorpusSpec spec = make_corpus_spec(classes, per_class, {"site one", "site two"});
  spec.width_px = side;
  spec.height_px = side;
  return spec;
}

IndexingConfig synthetic_config() {
  IndexingConfig cfg;
  cfg.s_l = 16;
  cfg.s_h = 64;
  cfg.segmentation.min_component_px = 16;
  return cfg;
}

const Corpus& shared_small_corpus() {
  static const std::unique_ptr<TempDir> dir = std::make_unique<TempDir>("corpus");
  static const Corpus corpus = [] {
    Corpus c;
    c.dir = dir->path() / "corpus";
    c.slides = generate_synthetic_corpus(small_corpus_spec(4, 4), 7, c.dir);
    const IndexingConfig cfg = synthetic_config();
    c.index = index_corpus(c.dir, cfg, ReferenceExtractor(cfg.s_h));
    return c;
  }();
  return corpus;
}

SlidePyramid memory_slide(const std::string& id, const RgbImage& base, const std::vector<double>& mags) {
  std::vector<Level> levels;
  for (double m : mags) {
    const int factor = static_cast<int>(std::lround(mags.front() / m));
    levels.emplace_back(m, factor == 1 ? base : downsample(base, factor));
  }
  return SlidePyramid(id, SlideLabels{}, std::move(levels));
}

}  // namespace bob::testing
