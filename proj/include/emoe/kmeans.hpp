#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "emoe/common.hpp"
#include "emoe/geometry.hpp"

namespace emoe {

struct KMeansOptions {
  int max_iter = 200;
  double tol = 1e-6;  // stop once no centroid moves more than this, metres
};

struct KMeansResult {
  std::vector<Vec2> centroids;
  std::vector<std::size_t> assignment;
  std::vector<double> sse_history;  // SSE after each assignment step
  int iterations = 0;

  double sse() const { return sse_history.empty() ? 0.0 : sse_history.back(); }
};

namespace detail {

inline double dist2(Vec2 a, Vec2 b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// Nearest centroid, lowest index on ties.
inline double assign_points(std::span<const Vec2> pts, const std::vector<Vec2>& cents,
                            std::vector<std::size_t>& assignment) {
  double sse = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::size_t best = 0;
    double bd = dist2(pts[i], cents[0]);
    for (std::size_t c = 1; c < cents.size(); ++c) {
      const double d = dist2(pts[i], cents[c]);
      if (d < bd) {
        bd = d;
        best = c;
      }
    }
    assignment[i] = best;
    sse += bd;
  }
  return sse;
}

inline std::vector<Vec2> kmeanspp_init(std::span<const Vec2> pts, std::size_t k, Rng& rng) {
  std::vector<Vec2> cents;
  cents.reserve(k);
  cents.push_back(pts[rng.index(pts.size())]);
  std::vector<double> d2(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) d2[i] = dist2(pts[i], cents[0]);
  while (cents.size() < k) {
    double total = 0.0;
    for (double d : d2) total += d;
    std::size_t pick = 0;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      pick = pts.size() - 1;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        r -= d2[i];
        if (r < 0.0 && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.index(pts.size());
    }
    cents.push_back(pts[pick]);
    for (std::size_t i = 0; i < pts.size(); ++i) d2[i] = std::min(d2[i], dist2(pts[i], cents.back()));
  }
  return cents;
}

}  // namespace detail

/// Lloyd iterations from a k-means++ start. An empty cluster is re-seeded to
/// the point farthest from its current centroid.
inline KMeansResult kmeans(std::span<const Vec2> pts, std::size_t k, std::uint64_t seed,
                           const KMeansOptions& opt = {}) {
  if (k == 0) throw InvalidArgument("kmeans: k must be positive");
  if (pts.size() < k)
    throw InvalidArgument("kmeans: " + std::to_string(pts.size()) + " points for k = " + std::to_string(k));
  Rng rng(seed);
  KMeansResult r;
  r.centroids = detail::kmeanspp_init(pts, k, rng);
  r.assignment.assign(pts.size(), 0);

  for (r.iterations = 0; r.iterations < opt.max_iter; ++r.iterations) {
    r.sse_history.push_back(detail::assign_points(pts, r.centroids, r.assignment));

    std::vector<Vec2> sum(k, {0.0, 0.0});
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      sum[r.assignment[i]] = sum[r.assignment[i]] + pts[i];
      ++count[r.assignment[i]];
    }
    std::vector<Vec2> next = r.centroids;
    std::vector<bool> taken(pts.size(), false);
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] > 0) {
        next[c] = (1.0 / static_cast<double>(count[c])) * sum[c];
        continue;
      }
      std::size_t far = 0;
      double fd = -1.0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const double d = detail::dist2(pts[i], r.centroids[r.assignment[i]]);
        if (!taken[i] && d > fd) {
          fd = d;
          far = i;
        }
      }
      taken[far] = true;
      next[c] = pts[far];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) shift = std::max(shift, norm(next[c] - r.centroids[c]));
    r.centroids = std::move(next);
    if (shift < opt.tol) {
      ++r.iterations;
      break;
    }
  }
  r.sse_history.push_back(detail::assign_points(pts, r.centroids, r.assignment));
  return r;
}

}  // namespace emoe
