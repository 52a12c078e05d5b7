#include <catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>

#include "emoe/anchor_bank.hpp"
#include "emoe/generator.hpp"

using namespace emoe;

namespace {

std::vector<Vec2> random_points(Rng& rng, std::size_t n) {
  std::vector<Vec2> p(n);
  const int blobs = rng.integer(1, 6);
  std::vector<Vec2> centers(blobs);
  for (auto& c : centers) c = {rng.uniform(-50, 50), rng.uniform(-50, 50)};
  for (auto& q : p) {
    const Vec2 c = centers[rng.index(blobs)];
    q = {c.x + 5 * rng.normal(), c.y + 5 * rng.normal()};
  }
  return p;
}

bool same_set(std::vector<Vec2> a, std::vector<Vec2> b) {
  auto lt = [](Vec2 p, Vec2 q) { return p.x != q.x ? p.x < q.x : p.y < q.y; };
  std::sort(a.begin(), a.end(), lt);
  std::sort(b.begin(), b.end(), lt);
  return a == b;
}

}  // namespace

TEST_CASE("kmeans with k = n recovers the points") {
  Rng rng(1);
  std::vector<Vec2> pts(24);
  for (auto& p : pts) p = {rng.uniform(-10, 10), rng.uniform(-10, 10)};
  const auto r = kmeans(pts, 24, 5);
  CHECK(r.sse() == 0.0);
  CHECK(same_set(r.centroids, pts));
}

TEST_CASE("kmeans on two tight blobs finds the blob means") {
  Rng rng(2);
  std::vector<Vec2> pts;
  Vec2 m0{0, 0}, m1{0, 0};
  for (int i = 0; i < 200; ++i) {
    const Vec2 a{0.01 * rng.normal(), 0.01 * rng.normal()};
    const Vec2 b{100 + 0.01 * rng.normal(), 0.01 * rng.normal()};
    pts.push_back(a);
    pts.push_back(b);
    m0 = m0 + a;
    m1 = m1 + b;
  }
  m0 = (1.0 / 200) * m0;
  m1 = (1.0 / 200) * m1;
  auto c = kmeans(pts, 2, 3).centroids;
  if (c[0].x > c[1].x) std::swap(c[0], c[1]);
  CHECK(norm(c[0] - m0) < 1e-6);
  CHECK(norm(c[1] - m1) < 1e-6);
}

TEST_CASE("kmeans SSE is non-increasing every iteration") {
  Rng rng(4);
  for (int d = 0; d < 100; ++d) {
    const auto pts = random_points(rng, 50 + rng.index(400));
    const auto r = kmeans(pts, 1 + rng.index(24), rng.bits());
    for (std::size_t i = 1; i < r.sse_history.size(); ++i) REQUIRE(r.sse_history[i] <= r.sse_history[i - 1]);
  }
}

TEST_CASE("kmeans result beats the worst of 50 restarts and is deterministic") {
  Rng rng(6);
  const auto pts = random_points(rng, 300);
  const auto r = kmeans(pts, 8, 99);
  double worst = 0.0;
  for (int s = 0; s < 50; ++s) worst = std::max(worst, kmeans(pts, 8, 1000 + s).sse());
  CHECK(r.sse() <= worst);
  CHECK(kmeans(pts, 8, 99).centroids == r.centroids);
  CHECK_THROWS_AS(kmeans(std::vector<Vec2>(3), 4, 1), InvalidArgument);
}

TEST_CASE("collect_endpoints filters by label") {
  Scene a, b, c;
  a.label = b.label = ScenarioType::Straight;
  c.label = ScenarioType::UTurn;
  a.ego_future_gt = Trajectory{{{60, 0, 0, 1}}, 0.1};
  b.ego_future_gt = Trajectory{{{0, 0, 0, 0}}, 0.1};
  c.ego_future_gt = Trajectory{{{-5, 5, 0, 1}}, 0.1};
  const auto pts = collect_endpoints({a, b, c}, ScenarioType::Straight);
  REQUIRE(pts.size() == 2);
  CHECK(pts[0] == Vec2{60, 0});
  CHECK(pts[1] == Vec2{0, 0});
  CHECK(collect_endpoints({a, b, c}, ScenarioType::Roundabout).empty());
}

TEST_CASE("anchor bank over a synthetic dataset") {
  std::vector<Scene> ds;
  for (ScenarioType t : kAllScenarioTypes) {
    auto v = generate_synthetic(21, t, 200);
    ds.insert(ds.end(), v.begin(), v.end());
  }
  const auto bank = build_bank(ds, 24, 7);
  CHECK(bank.g.size() == 7 * 24);
  for (auto n : bank.counts) CHECK(n == 200);
  CHECK(build_bank(ds, 24, 7) == bank);

  double mean_x = 0.0;
  for (Vec2 p : bank.slice(ScenarioType::UTurn)) mean_x += p.x / 24.0;
  CHECK(mean_x < 0.0);

  const auto path = std::filesystem::temp_directory_path() / "emoe_bank_test.json";
  write_bank(bank, path);
  CHECK(read_bank(path) == bank);
  std::filesystem::remove(path);

  const auto svg = bank_to_svg(bank, ds);
  CHECK(svg.find("u_turn") != std::string::npos);

  std::vector<Scene> few(ds.begin(), ds.begin() + 10);
  CHECK_THROWS_WITH(build_bank(few, 24, 7), Catch::Matchers::ContainsSubstring("left_turn_junction"));
}
