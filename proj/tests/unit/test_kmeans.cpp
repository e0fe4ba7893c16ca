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

#include <limits>

#include "doctest.h"

#include "bob/error.hpp"
#include "bob/kmeans.hpp"
#include "bob/random.hpp"

using namespace bob;

namespace {

PointMatrix<double> rows(const std::vector<std::vector<double>>& pts) {
  PointMatrix<double> m(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(pts[0].size()));
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts[i].size(); ++j) m(i, j) = pts[i][j];
  return m;
}

double wcss_of(const PointMatrix<double>& p, const std::vector<int>& labels, int k) {
  double total = 0;
  for (int c = 0; c < k; ++c) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(p.cols());
    int n = 0;
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      if (labels[i] == c) {
        mean += p.row(i);
        ++n;
      }
    if (n == 0) continue;
    mean /= n;
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      if (labels[i] == c) total += (p.row(i) - mean).squaredNorm();
  }
  return total;
}

// Minimum WCSS over every assignment of n points to k labels.
double optimal_wcss(const PointMatrix<double>& p, int k) {
  const Eigen::Index n = p.rows();
  std::vector<int> labels(n, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    best = std::min(best, wcss_of(p, labels, k));
    Eigen::Index i = 0;
    while (i < n && ++labels[i] == k) labels[i++] = 0;
    if (i == n) break;
  }
  return best;
}

}  // namespace

TEST_CASE("k >= n puts every point in its own cluster") {
  const auto p = rows({{1, 2}, {3, 4}, {5, 6}});
  const auto r = kmeans<double>(p, 3, {});
  CHECK(r.wcss() == 0.0);
  CHECK(r.assignments == std::vector<int>{0, 1, 2});
  const auto r5 = kmeans<double>(p, 5, {});
  CHECK(r5.empty == std::vector<bool>{false, false, false, true, true});
}

TEST_CASE("{0, 1, 10, 11} split into two clusters matches the enumerated optimum") {
  const auto p = rows({{0}, {1}, {10}, {11}});
  CHECK(optimal_wcss(p, 2) == doctest::Approx(1.0));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    KMeansParams params;
    params.seed = seed;
    const auto r = kmeans<double>(p, 2, params);
    CHECK(r.assignments[0] == r.assignments[1]);
    CHECK(r.assignments[2] == r.assignments[3]);
    CHECK(r.assignments[0] != r.assignments[2]);
    CHECK(r.centroids(r.assignments[0], 0) == doctest::Approx(0.5));
    CHECK(r.centroids(r.assignments[2], 0) == doctest::Approx(10.5));
    CHECK(r.wcss() == doctest::Approx(1.0));
  }
}

TEST_CASE("well separated blobs reach the enumerated optimum") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> pts;
    for (int c = 0; c < 3; ++c) {
      const double cx = 100.0 * c, cy = 50.0 * (c % 2);
      for (int i = 0; i < 3; ++i) pts.push_back({cx + rng.normal(), cy + rng.normal()});
    }
    const auto p = rows(pts);
    KMeansParams params;
    params.seed = static_cast<std::uint64_t>(trial);
    const auto r = kmeans<double>(p, 3, params);
    CHECK(wcss_of(p, r.assignments, 3) == doctest::Approx(optimal_wcss(p, 3)));
  }
}

TEST_CASE("WCSS never increases and the result is deterministic") {
  Rng rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 20 + static_cast<int>(rng.index(200));
    PointMatrix<double> p(n, 3);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 3; ++j) p(i, j) = rng.uniform(0, 10) + 20.0 * (i % 4);
    KMeansParams params;
    params.seed = rng.next();
    params.rel_tol = 1e-9;
    const int k = 1 + static_cast<int>(rng.index(9));
    const auto a = kmeans<double>(p, k, params);
    for (std::size_t i = 1; i < a.wcss_history.size(); ++i)
      CHECK(a.wcss_history[i] <= a.wcss_history[i - 1] * (1 + 1e-12));
    CHECK(a.wcss() == doctest::Approx(wcss_of(p, a.assignments, k)));
    const auto b = kmeans<double>(p, k, params);
    CHECK(a.assignments == b.assignments);
    CHECK(a.centroids == b.centroids);
    for (int c = 0; c < k; ++c) CHECK(a.cluster_size(c) > 0);
  }
}

TEST_CASE("duplicate points never leave a cluster empty when distinct points suffice") {
  const auto p = rows({{0}, {0}, {0}, {0}, {5}, {9}});
  const auto r = kmeans<double>(p, 3, {});
  for (int c = 0; c < 3; ++c) CHECK(r.cluster_size(c) > 0);
}

TEST_CASE("float scalars work too") {
  PointMatrix<float> p(4, 1);
  p << 0.f, 1.f, 10.f, 11.f;
  const auto r = kmeans<float>(p, 2, {});
  CHECK(r.assignments[0] == r.assignments[1]);
  CHECK(r.assignments[0] != r.assignments[3]);
}

TEST_CASE("ragged input and bad parameters are rejected") {
  std::vector<Eigen::VectorXd> ragged{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3)};
  try {
    kmeans<double>(ragged, 1, {});
    FAIL("expected dimension mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDimensionMismatch);
  }
  const auto p = rows({{0}, {1}});
  CHECK_THROWS_AS(kmeans<double>(p, 0, {}), Error);
  KMeansParams bad;
  bad.max_iters = 0;
  CHECK_THROWS_AS(kmeans<double>(p, 1, bad), Error);
}
