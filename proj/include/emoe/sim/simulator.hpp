#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "emoe/common.hpp"
#include "emoe/geometry.hpp"
#include "emoe/scenario.hpp"

namespace emoe::sim {

/// Planner callback. `local` is the scene at the current step re-expressed in
/// the ego frame; `origin` is the ego pose that frame was built from. Returns a
/// trajectory in the same local frame, one point per dt starting one step ahead.
using Planner = std::function<Trajectory(const Scene& local, std::size_t step, const Pose2& origin)>;

struct ControllerConfig {
  std::size_t lookahead_steps = 4;  // plan points ahead used for steering
  double min_lookahead = 0.5;       // m; closer targets do not steer
  double speed_blend = 0.5;         // weight of the along-track distance to the next point over its speed
  double max_accel = 4.0;           // m/s^2
  double max_decel = 8.0;           // m/s^2
  double max_yaw_rate = 1.5;        // rad/s
};

struct SimConfig {
  double horizon_s = 15.0;
  double replan_hz = 1.0;
  ControllerConfig controller;
};

struct SimPlan {
  std::size_t step = 0;  // step at which the plan was made
  Trajectory world;      // world frame, point i is step + 1 + i
};

struct SimEvent {
  std::size_t step = 0;
  std::string other;  // agent id or "static<i>"
  bool at_fault = true;
};

struct SimLog {
  std::string scene_id;
  ScenarioType type = ScenarioType::Others;
  double dt = kDefaultDt;
  std::size_t steps = 0;                       // horizon / dt
  std::size_t replan_every = 10;
  Extent ego_extent;
  std::vector<TrajPoint> ego;                  // steps + 1 poses, index 0 is the start
  std::vector<std::string> agent_ids;
  std::vector<Extent> agent_extents;
  std::vector<std::vector<TrajPoint>> agents;  // per agent, steps + 1 replay poses
  std::vector<SimPlan> plans;
  std::vector<SimEvent> collisions;            // onsets, one per contact episode
  std::vector<std::size_t> off_drivable;       // steps with a footprint corner outside

  friend bool operator==(const SimLog&, const SimLog&) = default;
};

inline bool operator==(const SimPlan& a, const SimPlan& b) { return a.step == b.step && a.world == b.world; }
inline bool operator==(const SimEvent& a, const SimEvent& b) {
  return a.step == b.step && a.other == b.other && a.at_fault == b.at_fault;
}

inline std::size_t horizon_steps(double horizon_s, double dt) {
  if (!(horizon_s > 0.0)) throw InvalidArgument("sim: horizon must be positive");
  return static_cast<std::size_t>(std::llround(horizon_s / dt));
}

inline std::size_t replan_period(double replan_hz, double dt) {
  if (!(replan_hz > 0.0)) throw InvalidArgument("sim: replan rate must be positive");
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(1.0 / (replan_hz * dt))));
}

/// True when every footprint corner lies in the union of the drivable-edge
/// rings (boundary included).
inline bool footprint_drivable(const std::vector<const MapPolyline*>& edges, const Pose2& pose, const Extent& extent) {
  for (const Vec2 c : box_corners(pose, extent)) {
    bool inside = false;
    for (const auto* e : edges)
      if (polygon_contains(e->points, c)) {
        inside = true;
        break;
      }
    if (!inside) return false;
  }
  return true;
}

/// Replay pose of an agent at step t (0 is the last history point).
inline TrajPoint replay_pose(const Agent& a, std::size_t t) {
  if (t == 0) return a.history.points.back();
  return (*a.future_gt)[t - 1];
}

namespace detail {

// Agent strikes the ego from behind: agent centre behind the ego's rear
// bumper and closing along the ego heading.
inline bool rear_strike(const TrajPoint& ego, const Extent& ego_ext, const TrajPoint& other) {
  const FrameTransform f{ego.pose()};
  const Vec2 rel = f.point_to_local({other.x, other.y});
  const double closing = other.speed * std::cos(other.heading - ego.heading) - ego.speed;
  return rel.x < -0.5 * ego_ext.length && closing > 0.0;
}

inline constexpr double kStationarySpeed = 0.05;  // m/s

}  // namespace detail

/// Ego snapshot at step t in world coordinates: actual ego state, agent
/// histories drawn from the replay, original statics and map.
inline Scene snapshot_scene(const Scene& world, const TrajPoint& ego, double accel, double steer, std::size_t t) {
  Scene s;
  s.dt = world.dt;
  s.ego = world.ego;
  s.ego.pose = ego;
  s.ego.acceleration = accel;
  s.ego.steering = steer;
  s.statics = world.statics;
  s.map = world.map;
  s.label = world.label;
  for (const auto& a : world.agents) {
    Agent b;
    b.id = a.id;
    b.kind = a.kind;
    b.extent = a.extent;
    b.history.dt = a.history.dt;
    const std::size_t n = a.history.size();
    // Steps t-n+1 .. t, where negative steps index the logged history.
    for (std::size_t k = 0; k < n; ++k) {
      const long step = static_cast<long>(t) - static_cast<long>(n - 1 - k);
      b.history.points.push_back(step <= 0 ? a.history.points[static_cast<std::size_t>(static_cast<long>(n - 1) + step)]
                                           : (*a.future_gt)[static_cast<std::size_t>(step - 1)]);
    }
    s.agents.push_back(std::move(b));
  }
  return s;
}

/// Pure-pursuit follower on a unicycle: steers towards a plan point a few
/// steps ahead; speed blends the plan speed with the along-track distance to
/// the next plan point.
inline TrajPoint track_step(const TrajPoint& cur, const SimPlan& plan, std::size_t step, double dt,
                            const ControllerConfig& c, double& accel_out, double& yaw_rate_out) {
  const auto& pts = plan.world.points;
  auto at = [&](std::size_t abs_step) -> const TrajPoint& {
    // Plan point for an absolute step, held at the end of the plan.
    const std::size_t i = abs_step > plan.step ? abs_step - plan.step - 1 : 0;
    return pts[std::min(i, pts.size() - 1)];
  };
  const FrameTransform f{cur.pose()};
  const TrajPoint& next = at(step + 1);
  const Vec2 ahead = f.point_to_local({next.x, next.y});
  const double v_cmd = std::max(0.0, (1.0 - c.speed_blend) * next.speed + c.speed_blend * ahead.x / dt);
  double a = (v_cmd - cur.speed) / dt;
  a = std::clamp(a, -c.max_decel, c.max_accel);
  const double v = std::max(0.0, cur.speed + a * dt);
  a = (v - cur.speed) / dt;

  const TrajPoint& look = at(step + c.lookahead_steps);
  const Vec2 d = f.point_to_local({look.x, look.y});
  const double ld2 = d.x * d.x + d.y * d.y;
  double w = 0.0;
  if (ld2 > c.min_lookahead * c.min_lookahead) w = v * 2.0 * d.y / ld2;
  w = std::clamp(w, -c.max_yaw_rate, c.max_yaw_rate);

  TrajPoint n;
  const double h_mid = cur.heading + 0.5 * w * dt;
  n.x = cur.x + v * std::cos(h_mid) * dt;
  n.y = cur.y + v * std::sin(h_mid) * dt;
  n.heading = wrap_angle(cur.heading + w * dt);
  n.speed = v;
  accel_out = a;
  yaw_rate_out = w;
  return n;
}

/// Non-reactive closed loop. `world` is the scene in its own frame with
/// logged futures; agents replay those futures regardless of the ego.
inline SimLog run_closed_loop(const Scene& world, const Planner& planner, const SimConfig& cfg = {},
                              const std::string& scene_id = {}) {
  const double dt = world.dt;
  const std::size_t h = horizon_steps(cfg.horizon_s, dt);
  for (const auto& a : world.agents) {
    if (a.history.empty()) throw InvalidArgument("sim: agent " + a.id + " has no history");
    if (!a.future_gt || a.future_gt->size() < h)
      throw InvalidArgument("sim: horizon of " + std::to_string(h) + " steps exceeds replay data of agent " + a.id);
  }

  SimLog log;
  log.scene_id = scene_id;
  log.type = world.label.value_or(ScenarioType::Others);
  log.dt = dt;
  log.steps = h;
  log.replan_every = replan_period(cfg.replan_hz, dt);
  log.ego_extent = world.ego.extent;
  for (const auto& a : world.agents) {
    log.agent_ids.push_back(a.id);
    log.agent_extents.push_back(a.extent);
    std::vector<TrajPoint> track(h + 1);
    for (std::size_t t = 0; t <= h; ++t) track[t] = replay_pose(a, t);
    log.agents.push_back(std::move(track));
  }

  std::vector<const MapPolyline*> edges;
  for (const auto& m : world.map)
    if (m.kind == PolylineKind::DrivableEdge) edges.push_back(&m);

  TrajPoint ego = world.ego.pose;
  double accel = world.ego.acceleration, yaw_rate = 0.0;
  log.ego.push_back(ego);
  std::vector<char> in_contact(world.agents.size() + world.statics.size(), 0);

  auto check_step = [&](std::size_t t) {
    if (!footprint_drivable(edges, ego.pose(), world.ego.extent)) log.off_drivable.push_back(t);
    for (std::size_t i = 0; i < in_contact.size(); ++i) {
      bool hit;
      std::string id;
      TrajPoint other;
      if (i < world.agents.size()) {
        other = log.agents[i][t];
        hit = obb_overlap(ego.pose(), world.ego.extent, other.pose(), world.agents[i].extent);
        id = world.agents[i].id;
      } else {
        const auto& st = world.statics[i - world.agents.size()];
        other = {st.pose.x, st.pose.y, st.pose.heading, 0.0};
        hit = obb_overlap(ego.pose(), world.ego.extent, st.pose, st.extent);
        id = "static" + std::to_string(i - world.agents.size());
      }
      if (hit && !in_contact[i]) {
        const bool stationary = ego.speed < detail::kStationarySpeed;
        const bool rear = detail::rear_strike(ego, world.ego.extent, other);
        log.collisions.push_back({t, id, !(stationary || rear)});
      }
      in_contact[i] = hit ? 1 : 0;
    }
  };
  check_step(0);

  for (std::size_t t = 0; t < h; ++t) {
    if (t % log.replan_every == 0) {
      const double steer = ego.speed > 0.1 ? std::atan(2.8 * yaw_rate / ego.speed) : 0.0;
      const Scene snap = snapshot_scene(world, ego, accel, steer, t);
      const Pose2 origin = ego.pose();
      const Scene local = to_ego_frame(snap);
      Trajectory plan = planner(local, t, origin);
      if (plan.empty()) throw InvalidArgument("sim: planner returned an empty trajectory");
      log.plans.push_back({t, emoe::detail::transform_traj(FrameTransform{origin}, plan, false)});
    }
    ego = track_step(ego, log.plans.back(), t, dt, cfg.controller, accel, yaw_rate);
    log.ego.push_back(ego);
    check_step(t + 1);
  }
  return log;
}

/// Planner that replays the logged ego future from the current step,
/// re-expressed in the frame of the actual ego pose.
inline Planner gt_replay_planner(const Scene& world) {
  return [future = *world.ego_future_gt](const Scene&, std::size_t step, const Pose2& origin) {
    Trajectory t{{}, future.dt};
    const FrameTransform f{origin};
    for (std::size_t i = step; i < future.size(); ++i) t.points.push_back(emoe::detail::transform_point(f, future[i], true));
    if (t.empty()) t.points.push_back(emoe::detail::transform_point(f, future.points.back(), true));
    return t;
  };
}

/// Planner that asks to stand still at the current pose.
inline Planner stationary_planner(std::size_t steps = 80) {
  return [steps](const Scene&, std::size_t, const Pose2&) {
    return Trajectory{std::vector<TrajPoint>(steps, TrajPoint{}), kDefaultDt};
  };
}

// ---------------------------------------------------------------- json

inline nlohmann::json traj_points_json(const std::vector<TrajPoint>& pts) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& p : pts) a.push_back({p.x, p.y, p.heading, p.speed});
  return a;
}

inline nlohmann::json sim_log_to_json(const SimLog& log) {
  nlohmann::json j;
  j["scene_id"] = log.scene_id;
  j["scenario_type"] = std::string(to_string(log.type));
  j["dt"] = log.dt;
  j["steps"] = log.steps;
  j["replan_every"] = log.replan_every;
  j["ego_extent"] = {log.ego_extent.length, log.ego_extent.width};
  j["ego"] = traj_points_json(log.ego);
  nlohmann::json agents = nlohmann::json::array();
  for (std::size_t i = 0; i < log.agents.size(); ++i)
    agents.push_back({{"id", log.agent_ids[i]},
                      {"extent", {log.agent_extents[i].length, log.agent_extents[i].width}},
                      {"poses", traj_points_json(log.agents[i])}});
  j["agents"] = agents;
  nlohmann::json plans = nlohmann::json::array();
  for (const auto& p : log.plans) plans.push_back({{"step", p.step}, {"trajectory", traj_points_json(p.world.points)}});
  j["plans"] = plans;
  nlohmann::json col = nlohmann::json::array();
  for (const auto& e : log.collisions) col.push_back({{"step", e.step}, {"other", e.other}, {"at_fault", e.at_fault}});
  j["events"] = {{"collisions", col}, {"off_drivable", log.off_drivable}};
  return j;
}

}  // namespace emoe::sim
