#include <catch_amalgamated.hpp>

#include <cmath>

#include "emoe/generator.hpp"
#include "emoe/sim/metrics.hpp"

using namespace emoe;
using namespace emoe::sim;

namespace {

// Straight cruise along +x at speed v for `steps` steps.
SimLog cruise_log(double v, std::size_t steps = 150) {
  SimLog log;
  log.dt = 0.1;
  log.steps = steps;
  log.ego_extent = {4.6, 1.9};
  for (std::size_t t = 0; t <= steps; ++t) log.ego.push_back({v * 0.1 * static_cast<double>(t), 0.0, 0.0, v});
  return log;
}

MapPolyline corridor(double x0, double x1, double half_width) {
  MapPolyline m;
  m.kind = PolylineKind::DrivableEdge;
  m.points = {{x0, -half_width}, {x1, -half_width}, {x1, half_width}, {x0, half_width}};
  return m;
}

MapPolyline lane(double x0, double x1, double limit) {
  MapPolyline m;
  m.kind = PolylineKind::LaneCenter;
  m.points = {{x0, 0.0}, {x1, 0.0}};
  m.speed_limit = limit;
  return m;
}

const std::vector<Scene>& scenes() {
  static const std::vector<Scene> v = [] {
    std::vector<Scene> out;
    for (auto t : kAllScenarioTypes) {
      auto s = generate_synthetic(41, t, 6);
      out.insert(out.end(), s.begin(), s.end());
    }
    return out;
  }();
  return v;
}

}  // namespace

TEST_CASE("ground-truth planner is tracked closely") {
  for (const auto& s : scenes()) {
    const SimLog log = run_closed_loop(s, gt_replay_planner(s));
    REQUIRE(log.ego.size() == 151);
    double ade = 0.0;
    for (std::size_t t = 1; t <= 150; ++t)
      ade += std::hypot(log.ego[t].x - (*s.ego_future_gt)[t - 1].x, log.ego[t].y - (*s.ego_future_gt)[t - 1].y);
    CHECK(ade / 150.0 < 0.2);
    const MetricReport m = evaluate_log(log, s);
    CHECK(m.collisions == 1.0);
    CHECK(m.drivable == 1.0);
    CHECK(m.progress >= 0.95);
  }
}

TEST_CASE("replans at the configured rate") {
  const Scene& s = scenes()[0];
  SimConfig cfg;
  cfg.replan_hz = 2.0;
  cfg.horizon_s = 4.0;
  const SimLog log = run_closed_loop(s, gt_replay_planner(s), cfg);
  CHECK(log.steps == 40);
  CHECK(log.replan_every == 5);
  REQUIRE(log.plans.size() == 8);
  for (std::size_t i = 0; i < log.plans.size(); ++i) CHECK(log.plans[i].step == 5 * i);
}

TEST_CASE("stationary planner does not move a stopped ego") {
  Scene s = scenes()[3];
  s.ego.pose.speed = 0.0;
  const SimLog log = run_closed_loop(s, stationary_planner());
  for (const auto& p : log.ego) {
    CHECK(p.x == s.ego.pose.x);
    CHECK(p.y == s.ego.pose.y);
  }
  CHECK(evaluate_log(log, s).progress == 0.0);
}

TEST_CASE("agents replay their logs whatever the ego does") {
  const Scene& s = scenes()[10];
  const SimLog a = run_closed_loop(s, gt_replay_planner(s));
  const SimLog b = run_closed_loop(s, stationary_planner());
  CHECK(a.agents == b.agents);
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    CHECK(a.agents[i][0] == s.agents[i].history.points.back());
    for (std::size_t t = 1; t <= 150; ++t) CHECK(a.agents[i][t] == (*s.agents[i].future_gt)[t - 1]);
  }
}

TEST_CASE("identical runs give identical logs") {
  const Scene& s = scenes()[20];
  const SimLog a = run_closed_loop(s, gt_replay_planner(s));
  const SimLog b = run_closed_loop(s, gt_replay_planner(s));
  CHECK(a == b);
  CHECK(sim_log_to_json(a).dump() == sim_log_to_json(b).dump());
}

TEST_CASE("horizon beyond the replay is an error") {
  const Scene& s = scenes()[0];
  SimConfig cfg;
  cfg.horizon_s = 15.1;
  CHECK_THROWS_WITH(run_closed_loop(s, gt_replay_planner(s), cfg), Catch::Matchers::ContainsSubstring("exceeds replay"));
}

TEST_CASE("snapshot histories come from the replay") {
  const Scene& s = scenes()[5];
  const Scene snap = snapshot_scene(s, s.ego.pose, 0.0, 0.0, 30);
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const auto& h = snap.agents[i].history.points;
    REQUIRE(h.size() == s.agents[i].history.size());
    CHECK(h.back() == (*s.agents[i].future_gt)[29]);
    CHECK(!snap.agents[i].future_gt);
  }
  const Scene first = snapshot_scene(s, s.ego.pose, 0.0, 0.0, 0);
  for (std::size_t i = 0; i < s.agents.size(); ++i) CHECK(first.agents[i].history == s.agents[i].history);
}

TEST_CASE("collision scoring") {
  SimLog log = cruise_log(5.0);
  CHECK(at_fault_collisions(log) == 1.0);
  log.collisions.push_back({10, "a0", false});
  CHECK(at_fault_collisions(log) == 1.0);
  log.collisions.push_back({20, "a1", true});
  CHECK(at_fault_collisions(log) == 0.0);
}

TEST_CASE("rear strike on a stationary ego is not at fault") {
  Scene s;
  s.ego.pose = {0, 0, 0, 0};
  s.ego.extent = {4.6, 1.9};
  s.map.push_back(corridor(-50, 200, 5));
  s.ego_future_gt = Trajectory{std::vector<TrajPoint>(150, TrajPoint{0, 0, 0, 0}), 0.1};
  Agent a;
  a.id = "follower";
  a.extent = {4.5, 1.8};
  // Starts 8 m behind at 6 m/s and drives through the ego's position.
  for (int t = -19; t <= 0; ++t) a.history.points.push_back({-8.0 + 0.6 * t, 0, 0, 6});
  a.future_gt = Trajectory{{}, 0.1};
  for (int t = 1; t <= 150; ++t) a.future_gt->points.push_back({-8.0 + 0.6 * t, 0, 0, 6});
  s.agents.push_back(a);
  const SimLog log = run_closed_loop(s, stationary_planner());
  REQUIRE(!log.collisions.empty());
  CHECK(!log.collisions[0].at_fault);
  CHECK(at_fault_collisions(log) == 1.0);

  // The same contact with the ego driving into an agent ahead is at fault.
  Scene f = s;
  f.ego.pose.speed = 8.0;
  f.agents[0].history.points.clear();
  for (int t = -19; t <= 0; ++t) f.agents[0].history.points.push_back({12.0, 0, 0, 0});
  f.agents[0].future_gt->points.assign(150, TrajPoint{12.0, 0, 0, 0});
  Trajectory go{{}, 0.1};
  for (int t = 1; t <= 150; ++t) go.points.push_back({0.8 * t, 0, 0, 8});
  f.ego_future_gt = go;
  const SimLog hit = run_closed_loop(f, gt_replay_planner(f));
  REQUIRE(!hit.collisions.empty());
  CHECK(hit.collisions[0].at_fault);
  CHECK(at_fault_collisions(hit) == 0.0);
}

TEST_CASE("drivable compliance on constructed footprints") {
  const std::vector<const MapPolyline*> none;
  const MapPolyline road = corridor(-10, 100, 3.0);
  const std::vector<const MapPolyline*> edges = {&road};
  const Extent e{4.0, 2.0};
  CHECK(footprint_drivable(edges, {10, 0, 0}, e));
  CHECK_FALSE(footprint_drivable(edges, {10, 2.5, 0}, e));
  // Corner exactly on the boundary counts as inside.
  CHECK(footprint_drivable(edges, {10, 2.0, 0}, e));
  CHECK_FALSE(footprint_drivable(none, {10, 0, 0}, e));
  // Union of two overlapping pieces.
  const MapPolyline more = corridor(90, 200, 3.0);
  CHECK(footprint_drivable({&road, &more}, {100, 0, 0}, e));

  SimLog log = cruise_log(5.0);
  CHECK(drivable_compliance(log) == 1.0);
  log.off_drivable.push_back(42);
  CHECK(drivable_compliance(log) == 0.0);
}

TEST_CASE("contact time under constant velocity") {
  const Extent e{4.0, 2.0};
  // Head-on, 5 m gap between bumpers, closing at 10 m/s: contact at 0.5 s.
  const double t = contact_time({0, 0, 0, 5}, e, {9, 0, kPi, 5}, e, 0.95, 0.01);
  CHECK(std::abs(t - 0.5) <= 0.01 + 1e-9);
  CHECK(contact_time({0, 0, 0, 10}, e, {0, 3.5, 0, 10}, e, 0.95, 0.01) == 0.95);

  SimLog log = cruise_log(10.0, 20);
  CHECK(ttc_within_bound(log) == 1.0);
  log.agent_ids = {"p"};
  log.agent_extents = {e};
  std::vector<TrajPoint> parallel;
  for (const auto& p : log.ego) parallel.push_back({p.x, 3.5, 0, 10});
  log.agents = {parallel};
  CHECK(ttc_within_bound(log) == 1.0);
  std::vector<TrajPoint> oncoming;
  for (std::size_t i = 0; i < log.ego.size(); ++i) oncoming.push_back({log.ego[i].x + 30.0 - 2.0 * i, 0, kPi, 10});
  log.agents = {oncoming};
  CHECK(ttc_within_bound(log) == 0.0);
}

TEST_CASE("progress along the expert route") {
  std::vector<Vec2> route;
  for (int i = 0; i <= 150; ++i) route.push_back({1.0 * i, 0.0});
  CHECK(progress(cruise_log(10.0), route) == Catch::Approx(1.0));
  CHECK(progress(cruise_log(0.0), route) == 0.0);
  CHECK(progress(cruise_log(5.0), route) == Catch::Approx(0.5).margin(0.02));
  // A route that doubles back is measured along its length.
  std::vector<Vec2> hairpin;
  for (int i = 0; i <= 50; ++i) hairpin.push_back({1.0 * i, 0.0});
  for (int i = 0; i <= 50; ++i) hairpin.push_back({50.0 - i, 4.0});
  SimLog back = cruise_log(0.0, 1);
  back.ego.clear();
  for (std::size_t i = 0; i + 10 < hairpin.size(); ++i) back.ego.push_back({hairpin[i].x, hairpin[i].y + 0.3, 0, 0});
  CHECK(progress(back, hairpin) == Catch::Approx(94.0 / 104.0).margin(1e-9));
}

TEST_CASE("speed compliance") {
  const std::vector<MapPolyline> map = {lane(-10, 200, 10.0)};
  CHECK(speed_compliance(cruise_log(8.0), map) == 1.0);
  CHECK(speed_compliance(cruise_log(20.0), map) == 0.0);
  CHECK(speed_compliance(cruise_log(12.5), map) == Catch::Approx(0.75));
}

TEST_CASE("comfort thresholds") {
  CHECK(comfort(cruise_log(8.0)) == 1.0);
  SimLog step = cruise_log(8.0);
  for (std::size_t t = 75; t < step.ego.size(); ++t) step.ego[t].speed = 8.6;
  const auto k = ego_kinematics(step);
  // 0.6 m/s in one step: 6 m/s^2, then a jerk of 60 m/s^3.
  CHECK(*std::max_element(k.jerk.begin(), k.jerk.end()) == Catch::Approx(60.0));
  CHECK(comfort(step) == 0.0);
  ComfortLimits loose;
  loose.lon_accel = 10.0;
  loose.jerk = 100.0;
  CHECK(comfort(step, loose) == 1.0);
}

TEST_CASE("score table rows and gating") {
  MetricReport perfect{1, 1, 1, 1, 1, 1};
  CHECK(perfect.composite() == 1.0);
  MetricReport crash = perfect;
  crash.collisions = 0.0;
  CHECK(crash.composite() == 0.0);
  MetricReport partial{1, 1, 0, 0.5, 1, 0};
  CHECK(partial.composite() == Catch::Approx((0.0 * 5 + 0.5 * 5 + 1.0 * 4 + 0.0 * 2) / 16.0));

  std::vector<std::pair<ScenarioType, MetricReport>> runs;
  for (auto t : kAllScenarioTypes) runs.push_back({t, perfect});
  runs.push_back({ScenarioType::UTurn, crash});
  const auto rows = score_table(runs);
  REQUIRE(rows.size() == 7);
  for (const auto& r : rows) {
    if (r.type == ScenarioType::UTurn) {
      CHECK(r.runs == 2);
      CHECK(r.composite == 0.5);
      CHECK(r.mean.collisions == 0.5);
    } else {
      CHECK(r.runs == 1);
      CHECK(r.composite == 1.0);
    }
  }
  const std::string csv = score_table_csv(rows);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 8);
  CHECK(csv.rfind("scenario,runs,collisions,drivable,ttc,progress,speed,comfort,composite\n", 0) == 0);
  const std::string svg = score_table_svg(rows);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), ',') == 8 * 8);
}

TEST_CASE("metrics stay in the unit interval") {
  for (const auto& s : scenes()) {
    const MetricReport m = evaluate_log(run_closed_loop(s, stationary_planner()), s);
    for (double v : {m.collisions, m.drivable, m.ttc, m.progress, m.speed, m.comfort, m.composite()}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}
