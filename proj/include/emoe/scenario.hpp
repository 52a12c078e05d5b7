#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emoe/common.hpp"
#include "emoe/geometry.hpp"

namespace emoe {

/// Seven scenario classes. The underlying value is the expert index.
enum class ScenarioType : int {
  LeftTurnJunction = 0,
  StraightJunction = 1,
  RightTurnJunction = 2,
  Straight = 3,
  Roundabout = 4,
  UTurn = 5,
  Others = 6,
};

inline constexpr int kNumScenarioTypes = 7;

inline constexpr std::array<ScenarioType, kNumScenarioTypes> kAllScenarioTypes = {
    ScenarioType::LeftTurnJunction, ScenarioType::StraightJunction, ScenarioType::RightTurnJunction,
    ScenarioType::Straight,         ScenarioType::Roundabout,       ScenarioType::UTurn,
    ScenarioType::Others};

inline constexpr int index_of(ScenarioType t) { return static_cast<int>(t); }

inline ScenarioType scenario_from_index(int i) {
  if (i < 0 || i >= kNumScenarioTypes) throw InvalidArgument("scenario index out of range: " + std::to_string(i));
  return static_cast<ScenarioType>(i);
}

inline std::string_view to_string(ScenarioType t) {
  constexpr std::array<std::string_view, kNumScenarioTypes> names = {
      "left_turn_junction", "straight_junction", "right_turn_junction", "straight", "roundabout", "u_turn", "others"};
  return names[static_cast<std::size_t>(index_of(t))];
}

inline std::optional<ScenarioType> scenario_from_string(std::string_view s) {
  for (auto t : kAllScenarioTypes)
    if (to_string(t) == s) return t;
  return std::nullopt;
}

inline constexpr double kDefaultDt = 0.1;

struct TrajPoint {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;

  Pose2 pose() const { return {x, y, heading}; }
  friend bool operator==(const TrajPoint&, const TrajPoint&) = default;
};

struct Trajectory {
  std::vector<TrajPoint> points;
  double dt = kDefaultDt;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  const TrajPoint& operator[](std::size_t i) const { return points[i]; }
  TrajPoint& operator[](std::size_t i) { return points[i]; }

  /// First `n` points; the planning horizon of a longer logged trajectory.
  Trajectory head(std::size_t n) const {
    if (n > points.size())
      throw InvalidArgument("trajectory has " + std::to_string(points.size()) + " points, need " + std::to_string(n));
    return {{points.begin(), points.begin() + static_cast<std::ptrdiff_t>(n)}, dt};
  }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct EgoState {
  TrajPoint pose;
  double acceleration = 0.0;
  double steering = 0.0;
  Extent extent{4.6, 1.9};

  friend bool operator==(const EgoState&, const EgoState&) = default;
};

enum class AgentKind { Vehicle, Pedestrian, Cyclist };

struct Agent {
  std::string id;
  AgentKind kind = AgentKind::Vehicle;
  Extent extent{4.5, 1.8};
  Trajectory history;                  // oldest first; last point is the current state
  std::optional<Trajectory> future_gt;  // steps 1.. after the current state

  friend bool operator==(const Agent&, const Agent&) = default;
};

enum class StaticKind { Obstacle, Barrier, Cone };

struct StaticObject {
  Pose2 pose;
  Extent extent{1.0, 1.0};
  StaticKind kind = StaticKind::Obstacle;

  friend bool operator==(const StaticObject&, const StaticObject&) = default;
};

enum class PolylineKind { LaneCenter, LaneBoundary, Crosswalk, DrivableEdge };

/// Map region a polyline belongs to; feeds the junction/roundabout rules.
enum class MapRegion { Road, Junction, Roundabout };

/// Lane topology marker; merge/split lanes route to the "others" class.
enum class LaneTopology { Simple, Merge, Split };

struct MapPolyline {
  std::vector<Vec2> points;
  PolylineKind kind = PolylineKind::LaneCenter;
  bool on_route = false;
  std::optional<double> speed_limit;
  MapRegion region = MapRegion::Road;
  LaneTopology topology = LaneTopology::Simple;

  friend bool operator==(const MapPolyline&, const MapPolyline&) = default;
};

struct Scene {
  double dt = kDefaultDt;
  EgoState ego;
  std::vector<Agent> agents;
  std::vector<StaticObject> statics;
  std::vector<MapPolyline> map;
  std::optional<ScenarioType> label;
  std::optional<Trajectory> ego_future_gt;

  friend bool operator==(const Scene&, const Scene&) = default;
};

/// Entity caps and horizons shared by the encoder, generator and simulator.
struct SceneLimits {
  std::size_t max_agents = 8;
  std::size_t max_statics = 4;
  std::size_t max_polylines = 16;
  std::size_t polyline_points = 20;  // L_p
  std::size_t history_steps = 20;    // T_h
  std::size_t future_steps = 80;     // T_f
};

namespace detail {

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw InvalidArgument(std::string("non-finite coordinate in ") + what);
}

inline TrajPoint transform_point(const FrameTransform& f, const TrajPoint& p, bool to_local) {
  const Pose2 q = to_local ? f.pose_to_local(p.pose()) : f.pose_to_world(p.pose());
  return {q.x, q.y, q.heading, p.speed};
}

inline Trajectory transform_traj(const FrameTransform& f, const Trajectory& t, bool to_local) {
  Trajectory out{{}, t.dt};
  out.points.reserve(t.size());
  for (const auto& p : t.points) out.points.push_back(transform_point(f, p, to_local));
  return out;
}

inline Scene transform_scene(const Scene& scene, const Pose2& origin, bool to_local) {
  const FrameTransform f{origin};
  Scene out = scene;
  out.ego.pose = transform_point(f, scene.ego.pose, to_local);
  for (auto& a : out.agents) {
    a.history = transform_traj(f, a.history, to_local);
    if (a.future_gt) a.future_gt = transform_traj(f, *a.future_gt, to_local);
  }
  for (auto& s : out.statics) s.pose = to_local ? f.pose_to_local(s.pose) : f.pose_to_world(s.pose);
  for (auto& m : out.map)
    for (auto& p : m.points) p = to_local ? f.point_to_local(p) : f.point_to_world(p);
  if (out.ego_future_gt) out.ego_future_gt = transform_traj(f, *scene.ego_future_gt, to_local);
  return out;
}

inline void check_traj_finite(const Trajectory& t, const char* what) {
  for (const auto& p : t.points) {
    require_finite(p.x, what);
    require_finite(p.y, what);
    require_finite(p.heading, what);
    require_finite(p.speed, what);
  }
}

}  // namespace detail

/// Throws InvalidArgument on any non-finite coordinate.
inline void validate_finite(const Scene& s) {
  using detail::require_finite;
  require_finite(s.ego.pose.x, "ego");
  require_finite(s.ego.pose.y, "ego");
  require_finite(s.ego.pose.heading, "ego");
  require_finite(s.ego.pose.speed, "ego");
  for (const auto& a : s.agents) {
    detail::check_traj_finite(a.history, "agent history");
    if (a.future_gt) detail::check_traj_finite(*a.future_gt, "agent future");
  }
  for (const auto& st : s.statics) {
    require_finite(st.pose.x, "static");
    require_finite(st.pose.y, "static");
    require_finite(st.pose.heading, "static");
  }
  for (const auto& m : s.map)
    for (const auto& p : m.points) {
      require_finite(p.x, "map");
      require_finite(p.y, "map");
    }
  if (s.ego_future_gt) detail::check_traj_finite(*s.ego_future_gt, "ego future");
}

/// Re-expresses every entity in the ego frame (ego at origin, heading 0).
/// The original ego pose is the inverse transform's origin.
inline Scene to_ego_frame(const Scene& scene) {
  validate_finite(scene);
  return detail::transform_scene(scene, scene.ego.pose.pose(), true);
}

/// Inverse of to_ego_frame given the ego pose the scene was normalized from.
inline Scene from_ego_frame(const Scene& scene, const Pose2& origin) {
  validate_finite(scene);
  return detail::transform_scene(scene, origin, false);
}

/// Resamples a polyline to `n` points equally spaced in arc length.
inline std::vector<Vec2> resample_polyline(const std::vector<Vec2>& pts, std::size_t n) {
  if (pts.size() < 2 || n < 2) throw InvalidArgument("resample_polyline needs >= 2 points");
  std::vector<double> s(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) s[i] = s[i - 1] + norm(pts[i] - pts[i - 1]);
  const double total = s.back();
  std::vector<Vec2> out;
  out.reserve(n);
  std::size_t seg = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double target = total * static_cast<double>(k) / static_cast<double>(n - 1);
    while (seg + 2 < pts.size() && s[seg + 1] < target) ++seg;
    const double len = s[seg + 1] - s[seg];
    const double u = len > 0.0 ? std::clamp((target - s[seg]) / len, 0.0, 1.0) : 0.0;
    out.push_back(pts[seg] + u * (pts[seg + 1] - pts[seg]));
  }
  return out;
}

}  // namespace emoe
