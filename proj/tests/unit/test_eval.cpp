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

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "doctest.h"

#include "bob/error.hpp"
#include "bob/eval.hpp"
#include "test_support.hpp"

using namespace bob;

namespace {

// Fraction of k-subsets of the other N - 1 slides hitting one of n_c - 1.
double monte_carlo_baseline(int n, int n_c, int k, int trials, Rng& rng) {
  int hits = 0;
  for (int t = 0; t < trials; ++t) {
    const auto pick = rng.sample_without_replacement(static_cast<std::size_t>(n - 1), static_cast<std::size_t>(k));
    hits += std::any_of(pick.begin(), pick.end(), [&](std::size_t i) { return i < static_cast<std::size_t>(n_c - 1); });
  }
  return static_cast<double>(hits) / trials;
}

ArchiveIndex labelled_index(const std::vector<std::pair<std::string, std::string>>& labels) {
  Rng rng(3);
  ArchiveIndex index;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    IndexedSlide s;
    s.slide_id = "s" + std::to_string(i);
    s.labels = SlideLabels::from_raw(labels[i].first, labels[i].second);
    s.bob = testing::random_bunch(rng, s.slide_id, 4, 32);
    index.add(s);
  }
  return index;
}

}  // namespace

TEST_CASE("random baseline closed form") {
  CHECK(random_baseline(10, 5, 1) == doctest::Approx(4.0 / 9.0));
  CHECK(random_baseline(10, 2, 1) == doctest::Approx(1.0 / 9.0));
  CHECK(random_baseline(40, 10, 10) == doctest::Approx(1.0 - [] {
          double r = 1;
          for (int i = 0; i < 10; ++i) r *= (30.0 - i) / (39.0 - i);
          return r;
        }()));
  CHECK(random_baseline(10, 2, 9) == 1.0);
  CHECK(random_baseline(10, 8, 3) == 1.0);  // k exceeds the 2 slides outside the class
  CHECK_THROWS_AS(random_baseline(10, 1, 1), Error);
  CHECK_THROWS_AS(random_baseline(10, 11, 1), Error);
  CHECK_THROWS_AS(random_baseline(10, 5, 0), Error);
  CHECK_THROWS_AS(random_baseline(10, 5, 10), Error);
}

TEST_CASE("random baseline agrees with simulation") {
  Rng rng(21);
  const int trials = 40000;
  for (auto [n, n_c, k] : {std::tuple{10, 5, 1}, {40, 10, 10}, {100, 3, 10}, {20, 4, 3}}) {
    const double p = random_baseline(n, n_c, k);
    const double se = std::sqrt(std::max(p * (1 - p), 1e-12) / trials);
    CHECK(std::abs(monte_carlo_baseline(n, n_c, k, trials, rng) - p) <= 3 * se + 1e-12);
  }
}

TEST_CASE("bernoulli expectation") {
  CHECK(bernoulli_expectation(40, 10, 10) == doctest::Approx(90.0 / 39.0));
  CHECK(bernoulli_expectation(40, 10, 10) == doctest::Approx(2.31).epsilon(0.001));
  CHECK_THROWS_AS(bernoulli_expectation(1, 1, 1), Error);
}

TEST_CASE("leave-one-out on the synthetic corpus") {
  const ArchiveIndex& index = testing::shared_small_corpus().index;
  ExperimentSpec spec;
  spec.top_k = 10;
  spec.mosaic_fractions = {0.3, 1.0};
  spec.repeats = 3;
  const EvalReport r = loo_accuracy(index, spec);
  CHECK(r.queries == 16);
  CHECK(r.accuracy == 1.0);
  CHECK(r.baseline == doctest::Approx(random_baseline(16, 4, 10)));
  CHECK(r.bernoulli_expectation == doctest::Approx(bernoulli_expectation(16, 4, 10)));
  CHECK(r.outcomes.size() == 16 * 3 + 16);
  REQUIRE(r.per_fraction.size() == 2);
  CHECK(r.per_fraction[0].repeats == 3);
  CHECK(r.per_fraction[1].repeats == 1);
  CHECK(r.per_fraction[1].std_accuracy == 0);
  CHECK(r.median_correct >= 3);

  const EvalReport again = loo_accuracy(index, spec);
  CHECK(loo_csv(again) == loo_csv(r));

  // Outcome semantics: success iff some top-k neighbor shares the label.
  for (const auto& o : r.outcomes) CHECK(o.success == (o.correct_count > 0));
}

TEST_CASE("k = N - 1 is always a success") {
  const ArchiveIndex& index = testing::shared_small_corpus().index;
  ExperimentSpec spec;
  spec.top_k = 15;
  spec.mosaic_fractions = {1.0};
  const EvalReport r = loo_accuracy(index, spec);
  CHECK(r.accuracy == 1.0);
  CHECK(r.baseline == 1.0);
  for (const auto& o : r.outcomes) CHECK(o.correct_count == 3);
}

TEST_CASE("attribute value selection") {
  const ArchiveIndex& index = testing::shared_small_corpus().index;
  ExperimentSpec spec;
  spec.attribute = Attribute::kDiagnosis;
  spec.attribute_value = "Class A";
  spec.mosaic_fractions = {1.0};
  spec.top_k = 5;
  const EvalReport r = loo_accuracy(index, spec);
  CHECK(r.queries == 4);
  spec.attribute_value = "class z";
  CHECK_THROWS_AS(loo_accuracy(index, spec), Error);

  const ArchiveIndex lone = labelled_index({{"x", "a"}, {"x", "a"}, {"x", "b"}});
  spec.attribute_value = "b";
  CHECK_THROWS_AS(loo_accuracy(lone, spec), Error);
  spec.attribute = Attribute::kSite;
  spec.attribute_value = "x";
  CHECK(loo_accuracy(lone, spec).accuracy == 1.0);
}

TEST_CASE("experiment spec validation and JSON") {
  ExperimentSpec s;
  s.top_k = 0;
  CHECK_THROWS_AS(s.validate(), Error);
  s.top_k = 3;
  s.mosaic_fractions = {0.0};
  CHECK_THROWS_AS(s.validate(), Error);
  s.mosaic_fractions = {0.5, 1.0};
  s.attribute = Attribute::kSite;
  s.attribute_value = "lung";
  const auto round = ExperimentSpec::from_json(s.to_json());
  CHECK(round.to_json() == s.to_json());
  CHECK_THROWS_AS(ExperimentSpec::from_json(nlohmann::json{{"attribute", "organ"}}), Error);
  CHECK_THROWS_AS(EvalPlan::from_json(nlohmann::json::object()), Error);
}

TEST_CASE("correct retrieval counts") {
  const ArchiveIndex& index = testing::shared_small_corpus().index;
  ExperimentSpec spec;
  spec.top_k = 10;
  const CountSummary c = correct_retrieval_counts(index, spec);
  CHECK(c.counts.size() == 16);
  std::vector<int> sorted = c.counts;
  std::sort(sorted.begin(), sorted.end());
  CHECK(c.median == doctest::Approx(0.5 * (sorted[7] + sorted[8])));
  for (int n : c.counts) CHECK((n >= 0 && n <= 3));
  CHECK(c.bernoulli_expectation == doctest::Approx(10.0 * 3 / 15));
}

TEST_CASE("confusion matrix") {
  const ArchiveIndex& index = testing::shared_small_corpus().index;
  const ConfusionMatrix m = confusion_matrix(index, "Site One");
  CHECK(m.site == "site one");
  CHECK(m.total == 8);
  int sum = 0, diag = 0;
  for (std::size_t t = 0; t < m.labels.size(); ++t) {
    int row = 0;
    for (std::size_t p = 0; p < m.labels.size(); ++p) row += m.counts[t][p];
    sum += row;
    diag += m.counts[t][t];
  }
  CHECK(sum == 8);
  CHECK(m.accuracy == doctest::Approx(static_cast<double>(diag) / 8));
  CHECK(m.accuracy >= 0.85);
  CHECK(confusion_csv(m).rfind("true,predicted,count\n", 0) == 0);

  const ArchiveIndex one = labelled_index({{"x", "a"}, {"x", "a"}, {"y", "b"}, {"y", "b"}});
  CHECK_THROWS_AS(confusion_matrix(one, "x"), Error);
}

TEST_CASE("eval plan output is byte-stable") {
  const ArchiveIndex& index = testing::shared_small_corpus().index;
  EvalPlan plan;
  ExperimentSpec a;
  a.mosaic_fractions = {0.5, 1.0};
  a.repeats = 2;
  ExperimentSpec b = a;
  b.top_k = 1;
  plan.experiments = {a, b};
  plan.confusion_sites = {"site one", "site two"};
  testing::TempDir d1("eval"), d2("eval");
  run_eval_plan(index, plan, d1.path());
  run_eval_plan(index, plan, d2.path());
  for (const char* f : {"summary.json", "diagnosis_all_k10/loo.csv", "diagnosis_all_k1/loo.csv",
                        "confusion_site-one.csv", "confusion_site-two.csv"}) {
    REQUIRE(std::filesystem::exists(d1 / f));
    CHECK(testing::read_file(d1 / f) == testing::read_file(d2 / f));
  }
  const auto summary = nlohmann::json::parse(testing::read_file(d1 / "summary.json"));
  CHECK(summary["experiments"].size() == 2);
  CHECK(summary["confusion"].size() == 2);
}
