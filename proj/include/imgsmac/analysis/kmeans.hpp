#pragma once

#include <limits>
#include <vector>

#include "imgsmac/common.hpp"

namespace imgsmac::analysis {

struct KMeansResult {
  std::vector<std::vector<double>> centroids;
  std::vector<int> assignment;
  double inertia = 0.0;
};

namespace detail {

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) d += (a[j] - b[j]) * (a[j] - b[j]);
  return d;
}

inline int nearest(const std::vector<std::vector<double>>& cs, const std::vector<double>& p, double* dist = nullptr) {
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < cs.size(); ++k) {
    const double d = sq_dist(cs[k], p);
    if (d < bd) {
      bd = d;
      best = static_cast<int>(k);
    }
  }
  if (dist) *dist = bd;
  return best;
}

// k-means++ seeding followed by Lloyd iterations.
inline KMeansResult lloyd(const std::vector<std::vector<double>>& pts, std::size_t K, Rng& rng, std::size_t max_iter) {
  const std::size_t n = pts.size();
  KMeansResult r;
  r.centroids.push_back(pts[uniform_index(rng, n)]);
  std::vector<double> d2(n);
  while (r.centroids.size() < K) {
    double total = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      nearest(r.centroids, pts[p], &d2[p]);
      total += d2[p];
    }
    if (total <= 0.0) break;  // fewer distinct points than K
    double u = uniform01(rng) * total;
    std::size_t pick = n - 1;
    for (std::size_t p = 0; p < n; ++p) {
      u -= d2[p];
      if (u < 0.0) {
        pick = p;
        break;
      }
    }
    r.centroids.push_back(pts[pick]);
  }
  const std::size_t k = r.centroids.size(), dim = pts.front().size();
  r.assignment.assign(n, -1);
  for (std::size_t it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t p = 0; p < n; ++p) {
      const int a = nearest(r.centroids, pts[p]);
      changed |= a != r.assignment[p];
      r.assignment[p] = a;
    }
    if (!changed && it > 0) break;
    std::vector<std::vector<double>> sum(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> count(k, 0);
    for (std::size_t p = 0; p < n; ++p) {
      ++count[r.assignment[p]];
      for (std::size_t j = 0; j < dim; ++j) sum[r.assignment[p]][j] += pts[p][j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] == 0) continue;  // empty cluster keeps its centroid
      for (std::size_t j = 0; j < dim; ++j) r.centroids[c][j] = sum[c][j] / static_cast<double>(count[c]);
    }
  }
  r.inertia = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    double d;
    r.assignment[p] = nearest(r.centroids, pts[p], &d);
    r.inertia += d;
  }
  return r;
}

}  // namespace detail

/// Best of `restarts` seeded runs by inertia. K is capped by the number of distinct points found during seeding.
inline KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t K, std::size_t restarts,
                           std::uint64_t seed, std::size_t max_iter = 100) {
  require(!points.empty(), "kmeans needs at least one point");
  require(K >= 1 && restarts >= 1, "kmeans needs K >= 1 and restarts >= 1");
  for (const auto& p : points) require(p.size() == points.front().size(), "kmeans points differ in dimension");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(seed, r));
    auto res = detail::lloyd(points, std::min(K, points.size()), rng, max_iter);
    if (res.inertia < best.inertia) best = std::move(res);
  }
  return best;
}

}  // namespace imgsmac::analysis
