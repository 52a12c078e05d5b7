#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "emoe/common.hpp"
#include "emoe/geometry.hpp"
#include "emoe/labeler.hpp"
#include "emoe/scenario.hpp"

namespace emoe {

struct GeneratorConfig {
  SceneLimits limits;
  std::size_t replay_steps = 150;  // logged future length, 15 s at dt = 0.1
  double dt = kDefaultDt;
  double max_curvature = 0.2;      // 1/m, bound on every ego future step
  double corridor_half_width = 5.0;
  double agent_clearance = 1.0;    // same-time footprint margin against the ego log
  int max_attempts = 200;
};

namespace detail {

/// Piecewise-linear curvature profile over arc length; constant beyond the knots.
struct CurvatureProfile {
  std::vector<std::pair<double, double>> knots;  // (s, kappa), s increasing

  double operator()(double s) const {
    if (knots.empty()) return 0.0;
    if (s <= knots.front().first) return knots.front().second;
    for (std::size_t i = 1; i < knots.size(); ++i) {
      if (s <= knots[i].first) {
        const auto [s0, k0] = knots[i - 1];
        const auto [s1, k1] = knots[i];
        return s1 > s0 ? k0 + (k1 - k0) * (s - s0) / (s1 - s0) : k1;
      }
    }
    return knots.back().second;
  }
};

struct Maneuver {
  CurvatureProfile curvature;
  double v0 = 8.0;
  double accel = 0.0;
  double v_min = 2.0;
  double v_max = 15.0;
  std::vector<std::pair<double, double>> junction;    // arc-length ranges
  std::vector<std::pair<double, double>> roundabout;
  LaneTopology topology = LaneTopology::Simple;
};

/// Ego log: index 0 is the current state; negative times extend straight back.
struct EgoLog {
  std::vector<TrajPoint> states;
  std::vector<double> arc;  // arc length at each state
  double v0 = 0.0;
  double dt = kDefaultDt;

  TrajPoint at(long t) const {
    if (t < 0) return {v0 * static_cast<double>(t) * dt, 0.0, 0.0, v0};
    return states[static_cast<std::size_t>(t)];
  }
};

inline EgoLog integrate_ego(const Maneuver& m, std::size_t steps, double dt) {
  EgoLog log;
  log.v0 = m.v0;
  log.dt = dt;
  TrajPoint p{0.0, 0.0, 0.0, m.v0};
  double s = 0.0;
  log.states.push_back(p);
  log.arc.push_back(0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    const double v_next = std::clamp(p.speed + m.accel * dt, m.v_min, m.v_max);
    const double ds = 0.5 * (p.speed + v_next) * dt;
    const double dtheta = m.curvature(s + 0.5 * ds) * ds;
    const double mid = p.heading + 0.5 * dtheta;
    p.x += ds * std::cos(mid);
    p.y += ds * std::sin(mid);
    p.heading = wrap_angle(p.heading + dtheta);
    p.speed = v_next;
    s += ds;
    log.states.push_back(p);
    log.arc.push_back(s);
  }
  return log;
}

/// Dense reference path along the ego log, extended behind and beyond it.
struct ReferencePath {
  std::vector<Vec2> pts;
  std::vector<double> heading;
  std::vector<double> s;  // arc length, 0 at the ego start

  std::vector<std::size_t> range(double s0, double s1) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (s[i] >= s0 && s[i] <= s1) idx.push_back(i);
    return idx;
  }

  std::vector<Vec2> offset_points(const std::vector<std::size_t>& idx, double lateral) const {
    std::vector<Vec2> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(pts[i] + lateral * Vec2{-std::sin(heading[i]), std::cos(heading[i])});
    return out;
  }
};

inline ReferencePath make_reference(const EgoLog& log, std::size_t steps, double back, double ahead) {
  ReferencePath ref;
  for (double b = back; b > 0.0; b -= 1.0) {
    ref.pts.push_back({-b, 0.0});
    ref.heading.push_back(0.0);
    ref.s.push_back(-b);
  }
  double last_s = -1.0;
  for (std::size_t t = 0; t <= steps; ++t) {
    if (t > 0 && log.arc[t] - last_s < 0.25) continue;
    ref.pts.push_back({log.states[t].x, log.states[t].y});
    ref.heading.push_back(log.states[t].heading);
    ref.s.push_back(log.arc[t]);
    last_s = log.arc[t];
  }
  const TrajPoint end = log.states[steps];
  for (double a = 1.0; a <= ahead; a += 1.0) {
    ref.pts.push_back({end.x + a * std::cos(end.heading), end.y + a * std::sin(end.heading)});
    ref.heading.push_back(end.heading);
    ref.s.push_back(log.arc[steps] + a);
  }
  return ref;
}

inline MapRegion region_at(const Maneuver& m, double s) {
  for (auto [a, b] : m.roundabout)
    if (s >= a && s <= b) return MapRegion::Roundabout;
  for (auto [a, b] : m.junction)
    if (s >= a && s <= b) return MapRegion::Junction;
  return MapRegion::Road;
}

inline Maneuver draw_maneuver(ScenarioType type, Rng& rng, double max_curvature) {
  Maneuver m;
  m.accel = rng.uniform(-0.3, 0.6);
  auto turn_knots = [](double s0, double ramp, double kappa, double delta) {
    // Heading change of a ramp-hold-ramp profile is kappa * (ramp + hold).
    const double hold = std::max(0.0, delta / std::abs(kappa) - ramp);
    return std::vector<std::pair<double, double>>{
        {0.0, 0.0}, {s0, 0.0}, {s0 + ramp, kappa}, {s0 + ramp + hold, kappa}, {s0 + 2 * ramp + hold, 0.0}};
  };
  auto cap_speed = [&](double kappa_peak, double cap) {
    return std::min(cap, 0.9 / std::max(std::abs(kappa_peak), 1e-9));
  };
  switch (type) {
    case ScenarioType::Straight: {
      m.v0 = rng.uniform(6.0, 14.0);
      const double k = rng.uniform(-0.001, 0.001);
      m.curvature.knots = {{0.0, k}};
      m.v_max = 15.0;
      break;
    }
    case ScenarioType::StraightJunction: {
      m.v0 = rng.uniform(5.0, 12.0);
      const double s0 = rng.uniform(5.0, 25.0);
      m.curvature.knots = {{0.0, 0.0}};
      m.junction = {{s0, s0 + rng.uniform(20.0, 30.0)}};
      m.v_max = 14.0;
      break;
    }
    case ScenarioType::LeftTurnJunction:
    case ScenarioType::RightTurnJunction: {
      const bool left = type == ScenarioType::LeftTurnJunction;
      const double radius = left ? rng.uniform(10.0, 18.0) : rng.uniform(8.0, 12.0);
      const double kappa = std::min(1.0 / radius, max_curvature) * (left ? 1.0 : -1.0);
      const double s0 = rng.uniform(2.0, 10.0), ramp = 5.0;
      const double delta = rng.uniform(75.0, 105.0) * kPi / 180.0;
      m.curvature.knots = turn_knots(s0, ramp, kappa, delta);
      m.v_max = cap_speed(kappa, 10.0);
      m.v0 = rng.uniform(std::min(5.0, m.v_max), m.v_max);
      m.junction = {{std::max(0.0, s0 - 5.0), m.curvature.knots.back().first + 5.0}};
      break;
    }
    case ScenarioType::Roundabout: {
      const double radius = rng.uniform(12.0, 18.0);
      const double ring = std::min(1.0 / radius, max_curvature);
      const double bend = -0.08;
      const double s0 = rng.uniform(3.0, 8.0);
      const double arc = rng.uniform(90.0, 200.0) * kPi / 180.0 / ring;
      double s = s0;
      auto& k = m.curvature.knots;
      k = {{0.0, 0.0}, {s, 0.0}};
      k.push_back({s += 3.0, bend});
      k.push_back({s += 4.0, bend});
      k.push_back({s += 4.0, ring});
      const double ring_start = s;
      k.push_back({s += arc, ring});
      k.push_back({s += 4.0, bend});
      k.push_back({s += 4.0, bend});
      k.push_back({s += 3.0, 0.0});
      m.roundabout = {{ring_start - 6.0, ring_start + arc + 6.0}};
      m.v_max = cap_speed(std::max(ring, std::abs(bend)), 9.0);
      m.v0 = rng.uniform(5.0, m.v_max);
      break;
    }
    case ScenarioType::UTurn: {
      const double radius = rng.uniform(6.0, 7.5);
      const double kappa = std::min(1.0 / radius, max_curvature);
      const double s0 = rng.uniform(0.0, 2.0), ramp = 3.0;
      const double delta = rng.uniform(170.0, 190.0) * kPi / 180.0;
      m.curvature.knots = turn_knots(s0, ramp, kappa, delta);
      m.v_max = cap_speed(kappa, 6.0);
      m.v0 = rng.uniform(0.85 * m.v_max, m.v_max);
      m.accel = rng.uniform(0.0, 0.4);
      break;
    }
    case ScenarioType::Others: {
      m.v0 = rng.uniform(6.0, 13.0);
      const double s0 = rng.uniform(5.0, 20.0), len = rng.uniform(35.0, 50.0);
      const double shift = rng.uniform(3.0, 3.8) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
      const double amp = shift * 2.0 * kPi / (len * len);
      auto& k = m.curvature.knots;
      k = {{0.0, 0.0}};
      for (int i = 0; i <= 16; ++i) {
        const double u = static_cast<double>(i) / 16.0;
        k.push_back({s0 + u * len, amp * std::sin(2.0 * kPi * u)});
      }
      m.topology = rng.bernoulli(0.5) ? LaneTopology::Merge : LaneTopology::Split;
      m.v_max = 15.0;
      break;
    }
  }
  m.v0 = std::clamp(m.v0, m.v_min, m.v_max);
  return m;
}

inline Extent agent_extent(AgentKind kind, Rng& rng) {
  switch (kind) {
    case AgentKind::Pedestrian: return {rng.uniform(0.5, 0.8), rng.uniform(0.5, 0.8)};
    case AgentKind::Cyclist: return {rng.uniform(1.6, 1.9), rng.uniform(0.6, 0.8)};
    case AgentKind::Vehicle: break;
  }
  return {rng.uniform(4.2, 5.0), rng.uniform(1.7, 2.0)};
}

/// Fills headings and speeds of a position-only track from finite differences.
inline void finish_track(std::vector<TrajPoint>& track, double dt) {
  for (std::size_t i = 0; i < track.size(); ++i) {
    const std::size_t a = i + 1 < track.size() ? i : i - 1;
    const Vec2 d{track[a + 1].x - track[a].x, track[a + 1].y - track[a].y};
    track[i].speed = norm(d) / dt;
    if (norm(d) > 1e-6) track[i].heading = std::atan2(d.y, d.x);
  }
}

}  // namespace detail

/// Draws `n` scenes of the requested class. Scenes are emitted in the ego frame
/// with logged futures of `replay_steps` steps; the first T_f steps form the
/// planning target. Draws whose rule label disagrees with `type` are rejected.
inline Scene generate_scene(std::uint64_t scene_seed, ScenarioType type, const GeneratorConfig& cfg = {}) {
  using namespace detail;
  Rng rng(scene_seed);
  const auto& lim = cfg.limits;
  const std::size_t steps = cfg.replay_steps;
  const long lag_max = 45;
  if (steps < lim.future_steps) throw InvalidArgument("replay_steps must cover the planning horizon");

  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    const Maneuver man = draw_maneuver(type, rng, cfg.max_curvature);
    const EgoLog log = integrate_ego(man, steps + static_cast<std::size_t>(lag_max), cfg.dt);

    Scene scene;
    scene.dt = cfg.dt;
    scene.ego.extent = {rng.uniform(4.4, 4.9), rng.uniform(1.8, 2.0)};
    scene.ego.pose = log.states[0];
    scene.ego.acceleration = (log.states[1].speed - log.states[0].speed) / cfg.dt;
    scene.ego.steering = std::atan(2.8 * man.curvature(0.0));
    Trajectory fut{{}, cfg.dt};
    fut.points.assign(log.states.begin() + 1, log.states.begin() + static_cast<std::ptrdiff_t>(steps) + 1);
    scene.ego_future_gt = fut;

    // Map built around the reference path of the logged ego motion.
    const ReferencePath ref = make_reference(log, steps, 15.0, 20.0);
    const double s_begin = ref.s.front(), s_end = ref.s.back();
    double speed_peak = 0.0;
    for (std::size_t t = 0; t <= steps; ++t) speed_peak = std::max(speed_peak, log.states[t].speed);
    const double limit = std::ceil(speed_peak) + 2.0;

    std::vector<double> cuts = {s_begin, s_end};
    for (auto [a, b] : man.junction) cuts.insert(cuts.end(), {a, b});
    for (auto [a, b] : man.roundabout) cuts.insert(cuts.end(), {a, b});
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> bounds;
    for (double c : cuts) {
      c = std::clamp(c, s_begin, s_end);
      if (!bounds.empty() && c - bounds.back() < 2.0) continue;
      while (!bounds.empty() && c - bounds.back() > 80.0) bounds.push_back(bounds.back() + 70.0);
      bounds.push_back(c);
    }
    if (bounds.back() < s_end - 1e-9) bounds.back() = s_end;
    for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
      const auto idx = ref.range(bounds[i], bounds[i + 1]);
      if (idx.size() < 2) continue;
      MapPolyline lane;
      lane.points = resample_polyline(ref.offset_points(idx, 0.0), lim.polyline_points);
      lane.kind = PolylineKind::LaneCenter;
      lane.on_route = true;
      lane.speed_limit = limit;
      lane.region = region_at(man, 0.5 * (bounds[i] + bounds[i + 1]));
      lane.topology = man.topology;
      scene.map.push_back(std::move(lane));
    }

    // Drivable corridor pieces, overlapping so their union has no gaps.
    const std::size_t half = lim.polyline_points / 2;
    double a = s_begin;
    while (a < s_end - 1e-6) {
      double b = a;
      std::size_t i0 = 0;
      while (i0 < ref.s.size() && ref.s[i0] < a) ++i0;
      double turn = 0.0;
      std::size_t j = i0;
      while (j + 1 < ref.s.size() && ref.s[j + 1] - a <= 45.0) {
        turn += std::abs(wrap_angle(ref.heading[j + 1] - ref.heading[j]));
        if (turn > kPi / 3.0) break;
        ++j;
      }
      b = std::max(ref.s[j], a + 2.0);
      const auto idx = ref.range(a, b);
      if (idx.size() >= 2) {
        auto left = resample_polyline(ref.offset_points(idx, cfg.corridor_half_width), half);
        auto right = resample_polyline(ref.offset_points(idx, -cfg.corridor_half_width), lim.polyline_points - half);
        MapPolyline edge;
        edge.kind = PolylineKind::DrivableEdge;
        edge.points = std::move(left);
        edge.points.insert(edge.points.end(), right.rbegin(), right.rend());
        scene.map.push_back(std::move(edge));
      }
      if (b >= s_end - 1e-6) break;
      a = b - 4.0;
    }

    if (type != ScenarioType::UTurn) {
      MapPolyline neighbour;
      neighbour.kind = PolylineKind::LaneCenter;
      neighbour.points = resample_polyline(ref.offset_points(ref.range(s_begin, s_end), 3.6), lim.polyline_points);
      neighbour.speed_limit = limit;
      scene.map.push_back(std::move(neighbour));
    }
    for (const auto& span : man.junction) {
      const double ja = span.first;
      std::size_t i = 0;
      while (i + 1 < ref.s.size() && ref.s[i] < ja) ++i;
      MapPolyline cw;
      cw.kind = PolylineKind::Crosswalk;
      cw.region = MapRegion::Junction;
      const Vec2 n{-std::sin(ref.heading[i]), std::cos(ref.heading[i])};
      cw.points = resample_polyline({ref.pts[i] + 4.0 * n, ref.pts[i] - 4.0 * n}, lim.polyline_points);
      scene.map.push_back(std::move(cw));
    }
    if (scene.map.size() > lim.max_polylines) continue;

    // Statics beside the corridor.
    const long t_lo = -static_cast<long>(lim.history_steps) + 1, t_hi = static_cast<long>(steps);
    auto clear_of_ego = [&](auto&& pose_at, const Extent& ext, double margin) {
      for (long t = t_lo; t <= t_hi; ++t)
        if (obb_overlap(log.at(t).pose(), scene.ego.extent, pose_at(t), ext, margin)) return false;
      return true;
    };
    const int n_statics = rng.integer(0, static_cast<int>(std::min<std::size_t>(3, lim.max_statics)));
    for (int k = 0; k < n_statics; ++k) {
      const std::size_t i = static_cast<std::size_t>(rng.index(ref.pts.size()));
      const double lat = rng.uniform(5.5, 7.0) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
      StaticObject st;
      st.kind = static_cast<StaticKind>(rng.index(3));
      st.extent = st.kind == StaticKind::Cone ? Extent{0.4, 0.4}
                  : st.kind == StaticKind::Barrier ? Extent{2.0, 0.5}
                                                   : Extent{1.5, 1.5};
      const Vec2 p = ref.offset_points({i}, lat)[0];
      st.pose = {p.x, p.y, wrap_angle(ref.heading[i] + rng.uniform(-0.3, 0.3))};
      if (clear_of_ego([&](long) { return st.pose; }, st.extent, cfg.agent_clearance)) scene.statics.push_back(st);
    }

    // Replayed agents, each checked for same-time clearance against the ego log.
    const int n_agents = rng.integer(1, static_cast<int>(std::min<std::size_t>(8, lim.max_agents)));
    for (int k = 0; k < n_agents; ++k) {
      for (int tries = 0; tries < 20; ++tries) {
        const double pick = rng.uniform();
        AgentKind kind = AgentKind::Vehicle;
        std::function<Pose2(long)> pose_at;
        if (pick < 0.2) {  // lead on the ego path
          const long lag = rng.integer(35, static_cast<int>(lag_max));
          pose_at = [&log, lag](long t) { return log.at(t + lag).pose(); };
        } else if (pick < 0.4) {  // follower on the ego path
          const long lag = rng.integer(35, 60);
          pose_at = [&log, lag](long t) { return log.at(t - lag).pose(); };
        } else if (pick < 0.55) {  // neighbouring lane
          const long lag = rng.integer(-30, 30);
          const double lat = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(3.4, 3.8);
          pose_at = [&log, lag, lat](long t) {
            const TrajPoint p = log.at(t + lag);
            return Pose2{p.x - lat * std::sin(p.heading), p.y + lat * std::cos(p.heading), p.heading};
          };
        } else {  // crossing the ego path ahead or behind the ego in time
          const double u = rng.uniform();
          kind = u < 0.6 ? AgentKind::Vehicle : (u < 0.8 ? AgentKind::Cyclist : AgentKind::Pedestrian);
          const double speed = kind == AgentKind::Vehicle   ? rng.uniform(5.0, 10.0)
                               : kind == AgentKind::Cyclist ? rng.uniform(3.0, 5.0)
                                                            : rng.uniform(1.0, 1.6);
          const long tc = rng.integer(10, 100);
          const long shift = rng.integer(20, 45) * (rng.bernoulli(0.5) ? 1 : -1);
          const TrajPoint pc = log.at(tc);
          const double dir = wrap_angle(pc.heading + rng.uniform(60.0, 120.0) * kPi / 180.0 *
                                                         (rng.bernoulli(0.5) ? 1.0 : -1.0));
          const double dt = cfg.dt;
          pose_at = [pc, dir, speed, tc, shift, dt](long t) {
            const double d = speed * static_cast<double>(t - tc - shift) * dt;
            return Pose2{pc.x + d * std::cos(dir), pc.y + d * std::sin(dir), dir};
          };
        }
        Agent agent;
        agent.kind = kind;
        agent.extent = agent_extent(kind, rng);
        if (!clear_of_ego(pose_at, agent.extent, cfg.agent_clearance)) continue;
        agent.id = "a" + std::to_string(scene.agents.size());
        std::vector<TrajPoint> track;
        for (long t = t_lo; t <= t_hi + 1; ++t) {
          const Pose2 p = pose_at(t);
          track.push_back({p.x, p.y, p.heading, 0.0});
        }
        const auto headings_given = track;
        finish_track(track, cfg.dt);
        for (std::size_t i = 0; i < track.size(); ++i) track[i].heading = headings_given[i].heading;
        track.pop_back();
        agent.history = {{track.begin(), track.begin() + static_cast<std::ptrdiff_t>(lim.history_steps)}, cfg.dt};
        agent.future_gt = Trajectory{{track.begin() + static_cast<std::ptrdiff_t>(lim.history_steps), track.end()},
                                     cfg.dt};
        scene.agents.push_back(std::move(agent));
        break;
      }
    }
    if (scene.agents.empty()) continue;
    if (label_scenario(scene, {.horizon_steps = lim.future_steps}) != type) continue;
    scene.label = type;
    return scene;
  }
  throw std::runtime_error("generate_scene: no valid draw for " + std::string(to_string(type)));
}

/// Scene i uses the derived seed (seed, type, i), so scenes can be produced
/// independently and in any order.
inline std::vector<Scene> generate_synthetic(std::uint64_t seed, ScenarioType type, std::size_t n,
                                             const GeneratorConfig& cfg = {}) {
  if (n == 0) throw InvalidArgument("generate_synthetic: n must be positive");
  std::vector<Scene> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(generate_scene(derive_seed(seed, static_cast<std::uint64_t>(index_of(type)), i), type, cfg));
  return out;
}

}  // namespace emoe
