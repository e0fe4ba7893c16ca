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

#include "bob/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "bob/config_io.hpp"
#include "bob/error.hpp"
#include "bob/parallel.hpp"

namespace bob {

using nlohmann::json;

namespace {

std::optional<std::string> attribute_of(const IndexedSlide& slide, Attribute a) {
  return a == Attribute::kSite ? slide.labels.primary_site : slide.labels.primary_diagnosis;
}

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double median_of(std::vector<double> values) {
  if (values.empty()) return 0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string file_slug(const std::string& text) {
  std::string out;
  for (char c : normalize_label(text)) out.push_back(c == ' ' ? '-' : c);
  return out.empty() ? "unlabeled" : out;
}

struct QuerySet {
  std::vector<const IndexedSlide*> queries;
  std::map<std::string, int> class_sizes;  // value -> slide count in index
  int n_total = 0;
};

QuerySet collect_queries(const ArchiveIndex& index, const ExperimentSpec& spec) {
  spec.validate();
  QuerySet set;
  set.n_total = static_cast<int>(index.entries.size());
  for (const auto& [id, slide] : index.entries) {
    if (auto v = attribute_of(slide, spec.attribute)) ++set.class_sizes[*v];
  }
  const std::string wanted = normalize_label(spec.attribute_value);
  for (const auto& [id, slide] : index.entries) {
    const auto v = attribute_of(slide, spec.attribute);
    if (!v) continue;
    if (!wanted.empty() && *v != wanted) continue;
    if (set.class_sizes[*v] < 2)
      fail(ErrorCode::kInvalidArgument,
           "attribute value '" + *v + "' is carried by a single slide; leave-one-out needs two");
    set.queries.push_back(&slide);
  }
  if (set.queries.empty())
    fail(ErrorCode::kInvalidArgument,
         "no slide carries attribute value '" + spec.attribute_value + "'");
  return set;
}

std::vector<QueryOutcome> run_queries(const ArchiveIndex& index, const ExperimentSpec& spec,
                                      const QuerySet& set, double fraction, std::uint64_t seed) {
  std::vector<QueryOutcome> outcomes(set.queries.size());
  parallel_for(set.queries.size(), [&](std::size_t i) {
    const IndexedSlide& q = *set.queries[i];
    const std::string value = *attribute_of(q, spec.attribute);
    ScanQuery query = ScanQuery::from_slide(q, ModeFilter::horizontal(), spec.top_k);
    query.mosaic_fraction = fraction;
    query.seed = seed;
    const SearchResult found = scan_knn(query, index);
    QueryOutcome o{q.slide_id, fraction, seed, false, 0};
    for (const auto& hit : found.ranked) {
      if (attribute_of(*index.find(hit.slide_id), spec.attribute) == value) ++o.correct_count;
    }
    o.success = o.correct_count > 0;
    outcomes[i] = std::move(o);
  });
  return outcomes;
}

}  // namespace

void ExperimentSpec::validate() const {
  if (top_k < 1) fail(ErrorCode::kInvalidArgument, "experiment: top_k must be >= 1");
  if (repeats < 1) fail(ErrorCode::kInvalidArgument, "experiment: repeats must be >= 1");
  if (mosaic_fractions.empty()) fail(ErrorCode::kInvalidArgument, "experiment: no mosaic fractions");
  for (double f : mosaic_fractions) {
    if (!(f > 0.0 && f <= 1.0)) fail(ErrorCode::kInvalidArgument, "experiment: fractions must be in (0, 1]");
  }
}

ExperimentSpec ExperimentSpec::from_json(const json& j) {
  ExperimentSpec s;
  const std::string attr = j.value("attribute", std::string("diagnosis"));
  if (attr == "site") {
    s.attribute = Attribute::kSite;
  } else if (attr == "diagnosis") {
    s.attribute = Attribute::kDiagnosis;
  } else {
    fail(ErrorCode::kInvalidArgument, "experiment: attribute must be 'site' or 'diagnosis'");
  }
  s.attribute_value = j.value("value", std::string());
  s.top_k = j.value("top_k", s.top_k);
  if (j.contains("mosaic_fractions")) j["mosaic_fractions"].get_to(s.mosaic_fractions);
  s.repeats = j.value("repeats", s.repeats);
  s.validate();
  return s;
}

json ExperimentSpec::to_json() const {
  return json{{"attribute", attribute == Attribute::kSite ? "site" : "diagnosis"},
              {"value", attribute_value},
              {"top_k", top_k},
              {"mosaic_fractions", mosaic_fractions},
              {"repeats", repeats}};
}

double random_baseline(int n_total, int n_class, int k) {
  if (n_class < 2 || n_class > n_total || k < 1 || k > n_total - 1)
    fail(ErrorCode::kInvalidArgument,
         "random_baseline needs 2 <= n_c <= N and 1 <= k <= N - 1 (N=" + std::to_string(n_total) +
             ", n_c=" + std::to_string(n_class) + ", k=" + std::to_string(k) + ")");
  // C(N - n_c, k) / C(N - 1, k) as a running product.
  double miss = 1.0;
  for (int i = 0; i < k; ++i) {
    const int num = n_total - n_class - i;
    if (num <= 0) {
      miss = 0.0;
      break;
    }
    miss *= static_cast<double>(num) / static_cast<double>(n_total - 1 - i);
  }
  return 1.0 - miss;
}

double bernoulli_expectation(int n_total, int n_class, int k) {
  if (n_total < 2 || n_class < 1 || n_class > n_total || k < 1)
    fail(ErrorCode::kInvalidArgument, "bernoulli_expectation: invalid arguments");
  return static_cast<double>(k) * (n_class - 1) / static_cast<double>(n_total - 1);
}

EvalReport loo_accuracy(const ArchiveIndex& index, const ExperimentSpec& spec) {
  const QuerySet set = collect_queries(index, spec);
  EvalReport report;
  report.queries = static_cast<int>(set.queries.size());
  const int k_eff = std::min(spec.top_k, set.n_total - 1);

  double baseline_sum = 0, bernoulli_sum = 0;
  for (const IndexedSlide* q : set.queries) {
    const int n_c = set.class_sizes.at(*attribute_of(*q, spec.attribute));
    baseline_sum += random_baseline(set.n_total, n_c, k_eff);
    bernoulli_sum += bernoulli_expectation(set.n_total, n_c, k_eff);
  }
  report.baseline = baseline_sum / report.queries;
  report.bernoulli_expectation = bernoulli_sum / report.queries;

  std::optional<double> full_accuracy;
  double largest = 0;
  std::vector<double> counts_at_largest;
  for (double fraction : spec.mosaic_fractions) {
    const int repeats = fraction < 1.0 ? spec.repeats : 1;
    std::vector<double> accuracies;
    std::vector<QueryOutcome> first_repeat;
    for (int r = 0; r < repeats; ++r) {
      auto outcomes = run_queries(index, spec, set, fraction, static_cast<std::uint64_t>(r));
      int successes = 0;
      for (const auto& o : outcomes) successes += o.success;
      accuracies.push_back(static_cast<double>(successes) / report.queries);
      if (r == 0) first_repeat = outcomes;
      report.outcomes.insert(report.outcomes.end(), outcomes.begin(), outcomes.end());
    }
    FractionStats stats;
    stats.fraction = fraction;
    stats.repeats = repeats;
    double sum = 0;
    for (double a : accuracies) sum += a;
    stats.mean_accuracy = sum / repeats;
    if (repeats > 1) {
      double ss = 0;
      for (double a : accuracies) ss += (a - stats.mean_accuracy) * (a - stats.mean_accuracy);
      stats.std_accuracy = std::sqrt(ss / (repeats - 1));
    }
    report.per_fraction.push_back(stats);
    if (fraction >= 1.0) full_accuracy = stats.mean_accuracy;
    if (fraction >= largest) {
      largest = fraction;
      counts_at_largest.clear();
      for (const auto& o : first_repeat) counts_at_largest.push_back(o.correct_count);
    }
  }
  if (full_accuracy) {
    report.accuracy = *full_accuracy;
  } else {
    int successes = 0;
    for (const auto& o : report.outcomes) successes += o.success;
    report.accuracy = static_cast<double>(successes) / report.outcomes.size();
  }
  report.median_correct = median_of(counts_at_largest);
  return report;
}

CountSummary correct_retrieval_counts(const ArchiveIndex& index, const ExperimentSpec& spec) {
  const QuerySet set = collect_queries(index, spec);
  const int k_eff = std::min(spec.top_k, set.n_total - 1);
  const auto outcomes = run_queries(index, spec, set, 1.0, 0);
  CountSummary summary;
  std::vector<double> values;
  double bernoulli_sum = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    summary.counts.push_back(outcomes[i].correct_count);
    values.push_back(outcomes[i].correct_count);
    const int n_c = set.class_sizes.at(*attribute_of(*set.queries[i], spec.attribute));
    bernoulli_sum += bernoulli_expectation(set.n_total, n_c, k_eff);
  }
  summary.median = median_of(values);
  summary.bernoulli_expectation = bernoulli_sum / static_cast<double>(outcomes.size());
  return summary;
}

ConfusionMatrix confusion_matrix(const ArchiveIndex& index, const std::string& site) {
  ConfusionMatrix m;
  m.site = normalize_label(site);
  std::vector<const IndexedSlide*> members;
  std::map<std::string, int> class_sizes;
  for (const auto& id : filter_by_site(index, site)) {
    const IndexedSlide* s = index.find(id);
    if (!s->labels.primary_diagnosis) continue;
    members.push_back(s);
    ++class_sizes[*s->labels.primary_diagnosis];
  }
  if (class_sizes.size() < 2)
    fail(ErrorCode::kInvalidArgument, "confusion matrix for site '" + m.site + "' needs at least two diagnoses");
  for (const auto& [label, n] : class_sizes) {
    if (n < 2)
      fail(ErrorCode::kInvalidArgument, "diagnosis '" + label + "' at site '" + m.site + "' has a single slide");
  }

  std::vector<std::string> predicted(members.size());
  parallel_for(members.size(), [&](std::size_t i) {
    predicted[i] = classify_by_vote(*members[i], index, site).label;
  });

  std::set<std::string> labels;
  for (const auto& [label, n] : class_sizes) labels.insert(label);
  for (const auto& p : predicted) labels.insert(p);
  m.labels.assign(labels.begin(), labels.end());
  auto position = [&](const std::string& label) {
    return static_cast<std::size_t>(std::lower_bound(m.labels.begin(), m.labels.end(), label) - m.labels.begin());
  };
  m.counts.assign(m.labels.size(), std::vector<int>(m.labels.size(), 0));
  int correct = 0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    const std::string& truth = *members[i]->labels.primary_diagnosis;
    ++m.counts[position(truth)][position(predicted[i])];
    correct += truth == predicted[i];
  }
  m.total = static_cast<int>(members.size());
  m.accuracy = static_cast<double>(correct) / m.total;
  return m;
}

EvalPlan EvalPlan::from_json(const json& j) {
  EvalPlan plan;
  if (j.contains("experiments")) {
    for (const auto& e : j["experiments"]) plan.experiments.push_back(ExperimentSpec::from_json(e));
  } else if (j.contains("attribute")) {
    plan.experiments.push_back(ExperimentSpec::from_json(j));
  }
  if (j.contains("confusion_sites")) j["confusion_sites"].get_to(plan.confusion_sites);
  if (plan.experiments.empty() && plan.confusion_sites.empty())
    fail(ErrorCode::kInvalidArgument, "eval plan has no experiments and no confusion sites");
  return plan;
}

std::string loo_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "query_id,fraction,seed,success,correct_count\n";
  for (const auto& o : report.outcomes) {
    out << o.query_id << ',' << shortest(o.fraction) << ',' << o.seed << ',' << (o.success ? 1 : 0)
        << ',' << o.correct_count << '\n';
  }
  return out.str();
}

std::string confusion_csv(const ConfusionMatrix& m) {
  std::ostringstream out;
  out << "true,predicted,count\n";
  for (std::size_t t = 0; t < m.labels.size(); ++t) {
    for (std::size_t p = 0; p < m.labels.size(); ++p) {
      out << m.labels[t] << ',' << m.labels[p] << ',' << m.counts[t][p] << '\n';
    }
  }
  return out.str();
}

void run_eval_plan(const ArchiveIndex& index, const EvalPlan& plan, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto write = [](const std::filesystem::path& path, const std::string& text) {
    std::ofstream(path, std::ios::binary) << text;
  };

  json summary;
  summary["config"] = index.config;
  summary["extractor_id"] = index.extractor_id;
  summary["slides"] = index.entries.size();
  summary["experiments"] = json::array();
  std::set<std::string> used;
  for (std::size_t i = 0; i < plan.experiments.size(); ++i) {
    const ExperimentSpec& spec = plan.experiments[i];
    const EvalReport report = loo_accuracy(index, spec);
    std::filesystem::path dir = out_dir;
    if (plan.experiments.size() > 1) {
      // <attribute>_<value>_k<top_k>, suffixed with the plan position when
      // two experiments would otherwise share a directory.
      std::string name = std::string(spec.attribute == Attribute::kSite ? "site_" : "diagnosis_") +
                         (spec.attribute_value.empty() ? std::string("all") : file_slug(spec.attribute_value)) +
                         "_k" + std::to_string(spec.top_k);
      if (!used.insert(name).second) name += "_" + std::to_string(i);
      dir /= name;
      std::filesystem::create_directories(dir);
    }
    write(dir / "loo.csv", loo_csv(report));
    json per_fraction = json::array();
    for (const auto& f : report.per_fraction) {
      per_fraction.push_back({{"fraction", f.fraction},
                              {"repeats", f.repeats},
                              {"mean_accuracy", f.mean_accuracy},
                              {"std_accuracy", f.std_accuracy}});
    }
    json e{{"spec", spec.to_json()},
           {"mode", "horizontal"},
           {"queries", report.queries},
           {"accuracy", report.accuracy},
           {"baseline", report.baseline},
           {"per_fraction", per_fraction},
           {"median_correct", report.median_correct},
           {"bernoulli_expectation", report.bernoulli_expectation},
           {"loo_csv", std::filesystem::relative(dir / "loo.csv", out_dir).generic_string()}};
    summary["experiments"].push_back(e);
  }
  summary["confusion"] = json::array();
  for (const auto& site : plan.confusion_sites) {
    const ConfusionMatrix m = confusion_matrix(index, site);
    const std::string name = "confusion_" + file_slug(site) + ".csv";
    write(out_dir / name, confusion_csv(m));
    summary["confusion"].push_back({{"site", m.site},
                                    {"mode", "vertical"},
                                    {"accuracy", m.accuracy},
                                    {"total", m.total},
                                    {"labels", m.labels},
                                    {"csv", name}});
  }
  write(out_dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace bob
