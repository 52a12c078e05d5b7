#include <catch_amalgamated.hpp>

#include <cmath>

#include "emoe/common.hpp"
#include "emoe/geometry.hpp"

using namespace emoe;

namespace {

// Dense point sampling of box b (perimeter and interior) tested against a's
// half-planes. Overlap iff any sample of b lies in a, or any sample of a lies
// in b (covers the case of a strictly inside b).
bool sampled_overlap(const Pose2& pa, const Extent& ea, const Pose2& pb, const Extent& eb, Rng& rng, int n) {
  auto probe = [&](const Pose2& src, const Extent& es, const Pose2& dst, const Extent& ed) {
    const FrameTransform f{src};
    for (int i = 0; i < n; ++i) {
      Vec2 local;
      if (i % 2 == 0) {
        const double u = rng.uniform() * 2.0 * (es.length + es.width);
        if (u < es.length) local = {u - 0.5 * es.length, 0.5 * es.width};
        else if (u < es.length + es.width) local = {0.5 * es.length, u - es.length - 0.5 * es.width};
        else if (u < 2 * es.length + es.width) local = {u - es.length - es.width - 0.5 * es.length, -0.5 * es.width};
        else local = {-0.5 * es.length, u - 2 * es.length - es.width - 0.5 * es.width};
      } else {
        local = {rng.uniform(-0.5, 0.5) * es.length, rng.uniform(-0.5, 0.5) * es.width};
      }
      if (box_contains(dst, ed, f.point_to_world(local))) return true;
    }
    return false;
  };
  return probe(pb, eb, pa, ea) || probe(pa, ea, pb, eb);
}

}  // namespace

TEST_CASE("wrap_angle maps into (-pi, pi]") {
  CHECK(wrap_angle(kPi) == Catch::Approx(kPi));
  CHECK(wrap_angle(-kPi) == Catch::Approx(kPi));
  CHECK(wrap_angle(3 * kPi / 2) == Catch::Approx(-kPi / 2));
  CHECK(wrap_angle(0.25) == 0.25);
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double a = wrap_angle(rng.uniform(-50, 50));
    CHECK(a > -kPi);
    CHECK(a <= kPi);
  }
}

TEST_CASE("obb_overlap basic cases") {
  const Extent e{4, 2};
  CHECK(obb_overlap({0, 0, 0}, e, {0, 0, 0}, e));
  CHECK_FALSE(obb_overlap({0, 0, 0}, e, {10, 0, 0}, e, 0.0));
  // Touching edges count.
  CHECK(obb_overlap({0, 0, 0}, e, {4, 0, 0}, e));
  CHECK_FALSE(obb_overlap({0, 0, 0}, e, {4.001, 0, 0}, e));
  // Margin grows each box by margin/2 per side.
  CHECK(obb_overlap({0, 0, 0}, e, {4.4, 0, 0}, e, 0.4));
  CHECK_FALSE(obb_overlap({0, 0, 0}, e, {4.41, 0, 0}, e, 0.4));
}

TEST_CASE("obb_overlap equals a sampling oracle on the rotated example") {
  Rng rng(11);
  const bool sat = obb_overlap({0, 0, 0}, {4, 2}, {3, 0, kPi / 4}, {4, 2});
  CHECK(sat == sampled_overlap({0, 0, 0}, {4, 2}, {3, 0, kPi / 4}, {4, 2}, rng, 100000));
  CHECK(sat);
}

TEST_CASE("obb_overlap is symmetric, rigid-invariant and monotone in margin") {
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    const Pose2 a{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-kPi, kPi)};
    const Pose2 b{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-kPi, kPi)};
    const Extent ea{rng.uniform(0.5, 6), rng.uniform(0.5, 3)};
    const Extent eb{rng.uniform(0.5, 6), rng.uniform(0.5, 3)};
    const bool r = obb_overlap(a, ea, b, eb);
    CHECK(r == obb_overlap(b, eb, a, ea));
    // Skip near-tangent pairs where rounding of the moved poses may flip.
    if (std::abs(obb_gap(a, ea, b, eb)) > 1e-9) {
      const FrameTransform f{{rng.uniform(-100, 100), rng.uniform(-100, 100), rng.uniform(-kPi, kPi)}};
      CHECK(r == obb_overlap(f.pose_to_world(a), ea, f.pose_to_world(b), eb));
    }
    if (r) CHECK(obb_overlap(a, ea, b, eb, rng.uniform(0, 2)));
  }
}

TEST_CASE("polygon_contains treats the boundary as inside") {
  const std::vector<Vec2> sq = {{0, 0}, {2, 0}, {2, 2}, {0, 2}};
  CHECK(polygon_contains(sq, {1, 1}));
  CHECK(polygon_contains(sq, {2, 1}));
  CHECK(polygon_contains(sq, {0, 0}));
  CHECK_FALSE(polygon_contains(sq, {2.01, 1}));
  CHECK_FALSE(polygon_contains(sq, {-1, -1}));
}

TEST_CASE("frame transform round trip") {
  const FrameTransform f{{10, 5, kPi / 2}};
  const Vec2 q = f.point_to_local({10, 6});
  CHECK(q.x == Catch::Approx(1.0));
  CHECK(q.y == Catch::Approx(0.0).margin(1e-12));
  const Vec2 back = f.point_to_world(q);
  CHECK(back.x == Catch::Approx(10.0));
  CHECK(back.y == Catch::Approx(6.0));
}
