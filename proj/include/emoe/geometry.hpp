#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "emoe/common.hpp"

namespace emoe {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  Vec2 position() const { return {x, y}; }
  friend bool operator==(const Pose2&, const Pose2&) = default;
};

/// Footprint size; length along the heading, width across it.
struct Extent {
  double length = 0.0;
  double width = 0.0;

  friend bool operator==(const Extent&, const Extent&) = default;
};

/// Rigid transform taking world coordinates into the frame of `origin`.
struct FrameTransform {
  Pose2 origin;

  Vec2 point_to_local(Vec2 p) const {
    const double c = std::cos(origin.heading), s = std::sin(origin.heading);
    const Vec2 d = p - origin.position();
    return {c * d.x + s * d.y, -s * d.x + c * d.y};
  }
  Vec2 point_to_world(Vec2 p) const {
    const double c = std::cos(origin.heading), s = std::sin(origin.heading);
    return {origin.x + c * p.x - s * p.y, origin.y + s * p.x + c * p.y};
  }
  Pose2 pose_to_local(Pose2 p) const {
    const Vec2 q = point_to_local(p.position());
    return {q.x, q.y, wrap_angle(p.heading - origin.heading)};
  }
  Pose2 pose_to_world(Pose2 p) const {
    const Vec2 q = point_to_world(p.position());
    return {q.x, q.y, wrap_angle(p.heading + origin.heading)};
  }
};

/// Corners of an oriented rectangle, counter-clockwise from front-left.
inline std::array<Vec2, 4> box_corners(const Pose2& pose, const Extent& extent) {
  const double c = std::cos(pose.heading), s = std::sin(pose.heading);
  const double hl = 0.5 * extent.length, hw = 0.5 * extent.width;
  const Vec2 f{c * hl, s * hl};
  const Vec2 l{-s * hw, c * hw};
  const Vec2 o = pose.position();
  return {o + f + l, o - f + l, o - f - l, o + f - l};
}

namespace detail {

// Largest gap between the projections of two boxes over the four candidate
// axes. Positive means separated; negative is minus the penetration depth.
inline double sat_gap(const std::array<Vec2, 4>& a, const std::array<Vec2, 4>& b) {
  const std::array<Vec2, 4> axes = {a[0] - a[1], a[1] - a[2], b[0] - b[1], b[1] - b[2]};
  double best = -std::numeric_limits<double>::infinity();
  for (Vec2 axis : axes) {
    const double n = norm(axis);
    if (n == 0.0) continue;
    axis = (1.0 / n) * axis;
    double amin = dot(a[0], axis), amax = amin, bmin = dot(b[0], axis), bmax = bmin;
    for (int i = 1; i < 4; ++i) {
      const double pa = dot(a[i], axis), pb = dot(b[i], axis);
      amin = std::min(amin, pa);
      amax = std::max(amax, pa);
      bmin = std::min(bmin, pb);
      bmax = std::max(bmax, pb);
    }
    best = std::max(best, std::max(bmin - amax, amin - bmax));
  }
  return best;
}

}  // namespace detail

/// Separating-axis test for two oriented rectangles, each grown by margin/2
/// on every side. Touching boxes count as overlapping.
inline bool obb_overlap(const Pose2& pose_a, const Extent& extent_a, const Pose2& pose_b, const Extent& extent_b,
                        double margin = 0.0) {
  const Extent ea{extent_a.length + margin, extent_a.width + margin};
  const Extent eb{extent_b.length + margin, extent_b.width + margin};
  // Circumscribed-circle rejection; exact and only skips clearly disjoint pairs.
  const double ra = 0.5 * std::hypot(ea.length, ea.width), rb = 0.5 * std::hypot(eb.length, eb.width);
  const double dx = pose_a.x - pose_b.x, dy = pose_a.y - pose_b.y;
  if (dx * dx + dy * dy > (ra + rb) * (ra + rb)) return false;
  return detail::sat_gap(box_corners(pose_a, ea), box_corners(pose_b, eb)) <= 0.0;
}

/// Signed SAT gap between two boxes (no margin): separation lower bound when
/// positive, minus the minimum penetration depth when negative.
inline double obb_gap(const Pose2& pose_a, const Extent& extent_a, const Pose2& pose_b, const Extent& extent_b) {
  return detail::sat_gap(box_corners(pose_a, extent_a), box_corners(pose_b, extent_b));
}

/// Closed containment test of a point in an oriented rectangle.
inline bool box_contains(const Pose2& pose, const Extent& extent, Vec2 p) {
  const Vec2 q = FrameTransform{pose}.point_to_local(p);
  return std::abs(q.x) <= 0.5 * extent.length && std::abs(q.y) <= 0.5 * extent.width;
}

/// Distance from p to segment ab.
inline double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return norm(p - (a + t * ab));
}

/// Point-in-polygon for a closed ring (last vertex joins the first). Points on
/// the boundary, within `tol`, are inside.
inline bool polygon_contains(std::span<const Vec2> ring, Vec2 p, double tol = 1e-9) {
  const std::size_t n = ring.size();
  if (n < 3) return false;
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 a = ring[i], b = ring[j];
    if (segment_distance(p, a, b) <= tol) return true;
    if ((a.y > p.y) != (b.y > p.y)) {
      const double xc = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < xc) inside = !inside;
    }
  }
  return inside;
}

}  // namespace emoe
