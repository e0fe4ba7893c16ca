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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bob/index_store.hpp"
#include "bob/search.hpp"

namespace bob {

enum class Attribute { kSite, kDiagnosis };

struct ExperimentSpec {
  Attribute attribute = Attribute::kDiagnosis;
  // Empty: every slide with any value of the attribute is a query and
  // succeeds on its own value.
  std::string attribute_value;
  int top_k = 10;
  std::vector<double> mosaic_fractions{0.10, 0.30, 0.70, 1.00};
  int repeats = 50;  // for fractions < 1; fraction 1.0 runs once

  void validate() const;
  static ExperimentSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct QueryOutcome {
  std::string query_id;
  double fraction = 1.0;
  std::uint64_t seed = 0;
  bool success = false;
  int correct_count = 0;
};

struct FractionStats {
  double fraction = 1.0;
  int repeats = 1;
  double mean_accuracy = 0;
  double std_accuracy = 0;  // sample std over repeats, 0 for one repeat
};

struct EvalReport {
  std::vector<QueryOutcome> outcomes;
  std::vector<FractionStats> per_fraction;
  int queries = 0;
  double accuracy = 0;          // at fraction 1.0 when present, else mean
  double baseline = 0;          // random_baseline, averaged over queries
  double median_correct = 0;    // at the largest fraction, seed 0
  double bernoulli_expectation = 0;
};

// 1 - C(N - n_c, k) / C(N - 1, k): the chance that k slides drawn uniformly
// from the other N - 1 include one of the n_c - 1 that share the class.
double random_baseline(int n_total, int n_class, int k);

// Expected same-class count among k uniform draws: k (n_c - 1) / (N - 1).
double bernoulli_expectation(int n_total, int n_class, int k);

EvalReport loo_accuracy(const ArchiveIndex& index, const ExperimentSpec& spec);

struct CountSummary {
  std::vector<int> counts;  // per query, index order
  double median = 0;
  double bernoulli_expectation = 0;
};

CountSummary correct_retrieval_counts(const ArchiveIndex& index,
                                      const ExperimentSpec& spec);

struct ConfusionMatrix {
  std::string site;
  std::vector<std::string> labels;      // row/column order
  std::vector<std::vector<int>> counts;  // [true][predicted]
  double accuracy = 0;
  int total = 0;
};

ConfusionMatrix confusion_matrix(const ArchiveIndex& index,
                                 const std::string& site);

// Evaluation plan file consumed by `bob eval`.
struct EvalPlan {
  std::vector<ExperimentSpec> experiments;
  std::vector<std::string> confusion_sites;

  static EvalPlan from_json(const nlohmann::json& j);
};

// Writes loo.csv / summary.json (in a subdirectory per experiment when the
// plan has several) and confusion_<site>.csv. Output is byte-stable.
void run_eval_plan(const ArchiveIndex& index, const EvalPlan& plan,
                   const std::filesystem::path& out_dir);

std::string loo_csv(const EvalReport& report);
std::string confusion_csv(const ConfusionMatrix& matrix);

}  // namespace bob
