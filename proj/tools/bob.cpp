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

// Command-line front end: corpus generation, indexing, search, evaluation
// and the HTTP service.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "bob/config_io.hpp"
#include "bob/error.hpp"
#include "bob/eval.hpp"
#include "bob/features.hpp"
#include "bob/index_store.hpp"
#include "bob/json_codec.hpp"
#include "bob/mosaic.hpp"
#include "bob/search.hpp"
#include "bob/service.hpp"
#include "bob/synthetic.hpp"
#include "bob/tissue.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) bob::fail(bob::ErrorCode::kNotFound, "cannot open " + path.string());
  return json::parse(in);
}

// Explicit --config wins; otherwise a corpus-local indexing.json; otherwise
// the built-in defaults.
bob::IndexingConfig resolve_config(const std::string& config, const fs::path& corpus) {
  if (!config.empty()) return bob::load_indexing_config(config);
  const fs::path local = corpus / "indexing.json";
  if (fs::exists(local)) {
    std::cerr << "using " << local.string() << "\n";
    return bob::load_indexing_config(local);
  }
  return {};
}

struct IndexArgs {
  std::string corpus, out, config, features;
};

void run_index(const IndexArgs& a) {
  const bob::IndexingConfig cfg = resolve_config(a.config, a.corpus);
  bob::ArchiveIndex index;
  if (a.features.empty()) {
    index = bob::index_corpus(a.corpus, cfg, bob::ReferenceExtractor(cfg.s_h));
  } else {
    index = bob::index_corpus(a.corpus, cfg, bob::ExternalExtractor(bob::import_external_features(fs::path(a.features))));
  }
  bob::save_index(index, a.out);
  std::cerr << "indexed " << index.entries.size() << " slides, " << index.barcode_count() << " barcodes of "
            << index.barcode_length << " bits -> " << a.out << "\n";
}

struct MosaicArgs {
  std::string corpus, out, config;
};

// Lists every mosaic patch with its indexing-level window, for extracting
// features with an external model.
void run_mosaic(const MosaicArgs& a) {
  const bob::IndexingConfig cfg = resolve_config(a.config, a.corpus);
  cfg.validate();
  std::ofstream file;
  if (!a.out.empty()) file.open(a.out, std::ios::binary);
  std::ostream& out = a.out.empty() ? std::cout : file;
  out << "#slide_id grid_x grid_y magnification x y size\n";
  for (const auto& dir : bob::list_slide_dirs(a.corpus)) {
    const bob::SlidePyramid slide = bob::open_slide(dir);
    const bob::Level& cluster = bob::select_magnification(slide, cfg.m_x_c);
    std::optional<bob::TissueMask> mask = bob::load_mask_override(slide, cluster);
    if (!mask) mask = bob::segment_tissue(cluster, cfg.segmentation);
    const bob::Mosaic mosaic = bob::build_mosaic(slide, *mask, cfg);
    const bob::Level& level = bob::select_magnification(slide, cfg.m_x_idx);
    for (const auto& p : mosaic.patches) {
      const auto w = bob::map_to_index_level(p, cfg.s_l, cfg.s_h, cluster.magnification(), level.magnification(),
                                             level.width(), level.height());
      out << p.slide_id << ' ' << p.grid_x << ' ' << p.grid_y << ' '
          << bob::format_magnification(level.magnification()) << ' ' << w.x << ' ' << w.y << ' ' << cfg.s_h << '\n';
    }
  }
}

struct SearchArgs {
  std::string index, slide, mode = "horizontal", site;
  int k = 10;
  double fraction = 1.0;
  std::uint64_t seed = 0;
  bool pretty = false;
};

void run_search(const SearchArgs& a) {
  const bob::ArchiveIndex index = bob::load_index(a.index);
  const bob::IndexedSlide* slide = index.find(a.slide);
  if (!slide) bob::fail(bob::ErrorCode::kNotFound, "unknown slide '" + a.slide + "'");
  bob::ModeFilter filter;
  if (bob::parse_mode(a.mode) == bob::SearchMode::kVertical) {
    const std::string site = a.site.empty() ? slide->labels.primary_site.value_or("") : a.site;
    if (site.empty()) bob::fail(bob::ErrorCode::kInvalidArgument, "vertical search needs --site");
    filter = bob::ModeFilter::vertical(site);
  }
  bob::ScanQuery query = bob::ScanQuery::from_slide(*slide, filter, a.k);
  query.mosaic_fraction = a.fraction;
  query.seed = a.seed;
  const json out = bob::search_result_json(bob::scan_knn(query, index), query, index);
  std::cout << (a.pretty ? out.dump(2) : out.dump()) << "\n";
}

struct EvalArgs {
  std::string index, spec, out;
};

void run_eval(const EvalArgs& a) {
  const bob::ArchiveIndex index = bob::load_index(a.index);
  bob::run_eval_plan(index, bob::EvalPlan::from_json(read_json(a.spec)), a.out);
  std::cerr << "wrote reports to " << a.out << "\n";
}

struct ServeArgs {
  std::string index, host = "127.0.0.1", corpus, feedback_log;
  int port = 8080;
};

void run_serve(const ServeArgs& a) {
  bob::ServiceOptions options;
  if (!a.corpus.empty()) options.corpus_dir = a.corpus;
  if (!a.feedback_log.empty()) options.feedback_log = a.feedback_log;
  bob::SearchService service(bob::load_index(a.index), options);
  std::cerr << "serving " << a.index << " on http://" << a.host << ":" << a.port << "\n";
  bob::serve(service, a.host, a.port);
}

struct GenArgs {
  std::string spec, out;
  std::uint64_t seed = 0;
};

void run_gen(const GenArgs& a) {
  const auto spec = bob::CorpusSpec::from_json(read_json(a.spec));
  const auto slides = bob::generate_synthetic_corpus(spec, a.seed, a.out);
  std::cerr << "generated " << slides.size() << " slides in " << a.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Whole-slide image search with bunches of barcodes"};
  app.require_subcommand(1);

  IndexArgs ia;
  auto* index_cmd = app.add_subcommand("index", "Index every slide directory in a corpus");
  index_cmd->add_option("corpus_dir", ia.corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  index_cmd->add_option("-o,--output", ia.out, "Index file to write")->required();
  index_cmd->add_option("--config", ia.config, "Indexing configuration JSON")->check(CLI::ExistingFile);
  index_cmd->add_option("--features", ia.features, "External feature file")->check(CLI::ExistingFile);

  MosaicArgs ma;
  auto* mosaic_cmd = app.add_subcommand("mosaic", "List mosaic patches and their indexing windows");
  mosaic_cmd->add_option("corpus_dir", ma.corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  mosaic_cmd->add_option("-o,--output", ma.out, "Output file (default stdout)");
  mosaic_cmd->add_option("--config", ma.config, "Indexing configuration JSON")->check(CLI::ExistingFile);

  SearchArgs sa;
  auto* search_cmd = app.add_subcommand("search", "Rank archive slides against an indexed query slide");
  search_cmd->add_option("--index", sa.index, "Index file")->required()->check(CLI::ExistingFile);
  search_cmd->add_option("--slide", sa.slide, "Query slide id")->required();
  search_cmd->add_option("--mode", sa.mode, "horizontal or vertical")
      ->check(CLI::IsMember({"horizontal", "vertical"}));
  search_cmd->add_option("--site", sa.site, "Primary site for vertical search (default: the query's)");
  search_cmd->add_option("-k", sa.k, "Number of results")->check(CLI::PositiveNumber);
  search_cmd->add_option("--fraction", sa.fraction, "Fraction of the query mosaic to use")
      ->check(CLI::Range(0.0, 1.0));
  search_cmd->add_option("--seed", sa.seed, "Subsampling seed");
  search_cmd->add_flag("--pretty", sa.pretty, "Indent the JSON output");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Run leave-one-out experiments and confusion matrices");
  eval_cmd->add_option("--index", ea.index, "Index file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--spec", ea.spec, "Evaluation plan JSON")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("-o,--output", ea.out, "Report directory")->required();

  ServeArgs va;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API");
  serve_cmd->add_option("--index", va.index, "Index file")->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--port", va.port, "TCP port")->check(CLI::Range(1, 65535));
  serve_cmd->add_option("--host", va.host, "Bind address");
  serve_cmd->add_option("--corpus", va.corpus, "Corpus directory for thumbnails")->check(CLI::ExistingDirectory);
  serve_cmd->add_option("--feedback-log", va.feedback_log, "Append-only feedback log (JSON lines)");

  GenArgs ga;
  auto* gen_cmd = app.add_subcommand("gen-corpus", "Generate a synthetic slide corpus");
  gen_cmd->add_option("spec", ga.spec, "Corpus spec JSON")->required()->check(CLI::ExistingFile);
  gen_cmd->add_option("seed", ga.seed, "Generator seed")->required();
  gen_cmd->add_option("-o,--output", ga.out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*index_cmd) run_index(ia);
    if (*mosaic_cmd) run_mosaic(ma);
    if (*search_cmd) run_search(sa);
    if (*eval_cmd) run_eval(ea);
    if (*serve_cmd) run_serve(va);
    if (*gen_cmd) run_gen(ga);
  } catch (const bob::Error& e) {
    std::cerr << "bob: " << bob::to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "bob: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
