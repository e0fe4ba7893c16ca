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
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "bob/error.hpp"
#include "bob/random.hpp"

namespace bob {

struct KMeansParams {
  int max_iters = 100;
  double rel_tol = 1e-4;
  std::uint64_t seed = 0;

  bool operator==(const KMeansParams&) const = default;
};

template <typename Scalar>
using PointMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct KMeansResult {
  std::vector<int> assignments;  // one per point, in [0, k)
  PointMatrix<Scalar> centroids;  // k x dim
  std::vector<bool> empty;        // centroid has no members
  // Within-cluster sum of squares after each assignment step.
  std::vector<Scalar> wcss_history;

  Scalar wcss() const {
    return wcss_history.empty() ? Scalar(0) : wcss_history.back();
  }
  int cluster_size(int c) const {
    int n = 0;
    for (int a : assignments) n += (a == c);
    return n;
  }
};

namespace detail {

template <typename Scalar>
Scalar assign_points(const PointMatrix<Scalar>& points,
                     const PointMatrix<Scalar>& centroids,
                     std::vector<int>& assignments,
                     std::vector<Scalar>& sq_dist) {
  const Eigen::Index n = points.rows();
  const Eigen::Index k = centroids.rows();
  Scalar total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Scalar best = std::numeric_limits<Scalar>::max();
    int best_c = 0;
    for (Eigen::Index c = 0; c < k; ++c) {
      const Scalar d = (points.row(i) - centroids.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        best_c = static_cast<int>(c);
      }
    }
    assignments[i] = best_c;
    sq_dist[i] = best;
    total += best;
  }
  return total;
}

// k-means++ seeding: first center uniform, the rest with probability
// proportional to squared distance to the nearest chosen center.
template <typename Scalar>
PointMatrix<Scalar> seed_plus_plus(const PointMatrix<Scalar>& points, int k,
                                   Rng& rng) {
  const Eigen::Index n = points.rows();
  PointMatrix<Scalar> centroids(k, points.cols());
  std::vector<double> nearest(static_cast<std::size_t>(n),
                              std::numeric_limits<double>::max());
  std::size_t first = rng.index(static_cast<std::size_t>(n));
  centroids.row(0) = points.row(first);
  for (int c = 1; c < k; ++c) {
    double total = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = static_cast<double>(
          (points.row(i) - centroids.row(c - 1)).squaredNorm());
      if (d < nearest[i]) nearest[i] = d;
      total += nearest[i];
    }
    Eigen::Index pick = 0;
    if (total <= 0) {
      // All points coincide with chosen centers.
      pick = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
    } else {
      double r = rng.uniform() * total;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        r -= nearest[i];
        if (r < 0 && nearest[i] > 0) {
          pick = i;
          break;
        }
      }
    }
    centroids.row(c) = points.row(pick);
  }
  return centroids;
}

// Moves each empty centroid onto the point farthest from its own centroid.
// Returns true if anything was reseeded.
template <typename Scalar>
bool reseed_empty(const PointMatrix<Scalar>& points,
                  PointMatrix<Scalar>& centroids, std::vector<int>& assignments,
                  std::vector<Scalar>& sq_dist) {
  const int k = static_cast<int>(centroids.rows());
  std::vector<int> counts(k, 0);
  for (int a : assignments) ++counts[a];
  bool changed = false;
  for (int c = 0; c < k; ++c) {
    if (counts[c] > 0) continue;
    Eigen::Index far = -1;
    Scalar far_d = -1;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      if (counts[assignments[i]] > 1 && sq_dist[i] > far_d) {
        far_d = sq_dist[i];
        far = i;
      }
    }
    if (far < 0) break;
    --counts[assignments[far]];
    centroids.row(c) = points.row(far);
    assignments[far] = c;
    sq_dist[far] = 0;
    ++counts[c];
    changed = true;
  }
  return changed;
}

}  // namespace detail

// Lloyd's algorithm from k-means++ seeding. Rows of `points` are samples.
// With n <= k every point becomes its own cluster and the remaining
// centroids are flagged empty. Stops when the relative WCSS decrease falls
// below rel_tol or after max_iters assignment steps.
template <typename Scalar>
KMeansResult<Scalar> kmeans(const PointMatrix<Scalar>& points, int k,
                            const KMeansParams& params) {
  const Eigen::Index n = points.rows();
  if (n < 1) fail(ErrorCode::kInvalidArgument, "kmeans: no points");
  if (k < 1) fail(ErrorCode::kInvalidArgument, "kmeans: k must be >= 1");
  if (params.max_iters < 1 || !(params.rel_tol > 0))
    fail(ErrorCode::kInvalidArgument, "kmeans: bad parameters");

  KMeansResult<Scalar> result;
  result.assignments.assign(static_cast<std::size_t>(n), 0);
  result.empty.assign(static_cast<std::size_t>(k), false);

  if (n <= k) {
    result.centroids = PointMatrix<Scalar>::Zero(k, points.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      result.assignments[i] = static_cast<int>(i);
      result.centroids.row(i) = points.row(i);
    }
    for (int c = static_cast<int>(n); c < k; ++c) result.empty[c] = true;
    result.wcss_history.push_back(Scalar(0));
    return result;
  }

  Rng rng(params.seed);
  PointMatrix<Scalar> centroids = detail::seed_plus_plus(points, k, rng);
  std::vector<Scalar> sq_dist(static_cast<std::size_t>(n));
  std::vector<int>& assign = result.assignments;

  auto wcss_of = [&] {
    Scalar s = 0;
    for (Scalar d : sq_dist) s += d;
    return s;
  };

  Scalar wcss = detail::assign_points(points, centroids, assign, sq_dist);
  if (detail::reseed_empty(points, centroids, assign, sq_dist)) wcss = wcss_of();
  result.wcss_history.push_back(wcss);

  for (int iter = 1; iter < params.max_iters; ++iter) {
    // Update step.
    PointMatrix<Scalar> sums = PointMatrix<Scalar>::Zero(k, points.cols());
    std::vector<int> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[i]) += points.row(i);
      ++counts[assign[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) centroids.row(c) = sums.row(c) / Scalar(counts[c]);
    }

    Scalar next = detail::assign_points(points, centroids, assign, sq_dist);
    if (detail::reseed_empty(points, centroids, assign, sq_dist)) next = wcss_of();
    result.wcss_history.push_back(next);

    const Scalar decrease = wcss - next;
    const bool converged =
        wcss <= 0 || decrease <= Scalar(params.rel_tol) * wcss;
    wcss = next;
    if (converged) break;
  }

  // Final centroids are the means of the final clusters.
  PointMatrix<Scalar> sums = PointMatrix<Scalar>::Zero(k, points.cols());
  std::vector<int> counts(k, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    sums.row(assign[i]) += points.row(i);
    ++counts[assign[i]];
  }
  for (int c = 0; c < k; ++c) {
    if (counts[c] > 0) {
      centroids.row(c) = sums.row(c) / Scalar(counts[c]);
    } else {
      result.empty[c] = true;
    }
  }
  result.centroids = std::move(centroids);
  return result;
}

// List-of-vectors form; throws kDimensionMismatch on ragged input.
template <typename Scalar>
KMeansResult<Scalar> kmeans(
    const std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& points, int k,
    const KMeansParams& params) {
  if (points.empty()) fail(ErrorCode::kInvalidArgument, "kmeans: no points");
  const Eigen::Index dim = points.front().size();
  PointMatrix<Scalar> stacked(static_cast<Eigen::Index>(points.size()), dim);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != dim)
      fail(ErrorCode::kDimensionMismatch,
           "kmeans: point " + std::to_string(i) + " has dimension " +
               std::to_string(points[i].size()) + ", expected " +
               std::to_string(dim));
    stacked.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  }
  return kmeans<Scalar>(stacked, k, params);
}

}  // namespace bob
