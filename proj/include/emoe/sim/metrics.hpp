#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "emoe/sim/simulator.hpp"

namespace emoe::sim {

struct ComfortLimits {
  double lon_accel = 4.0;  // m/s^2
  double lat_accel = 4.0;  // m/s^2
  double jerk = 8.0;       // m/s^3
  double yaw_rate = 0.95;  // rad/s
  double yaw_accel = 1.9;  // rad/s^2
};

struct MetricConfig {
  double ttc_bound = 0.95;  // s
  double ttc_resolution = 0.01;  // s, sampling of the projected motion
  ComfortLimits comfort;
};

// Composite weights; collisions gate the weighted mean.
inline constexpr double kWeightTtc = 5.0;
inline constexpr double kWeightProgress = 5.0;
inline constexpr double kWeightSpeed = 4.0;
inline constexpr double kWeightComfort = 2.0;

struct MetricReport {
  double collisions = 1.0;
  double drivable = 1.0;
  double ttc = 1.0;
  double progress = 0.0;
  double speed = 1.0;
  double comfort = 1.0;

  double composite() const {
    if (collisions == 0.0) return 0.0;
    const double w = kWeightTtc + kWeightProgress + kWeightSpeed + kWeightComfort;
    return collisions * (kWeightTtc * ttc + kWeightProgress * progress + kWeightSpeed * speed +
                         kWeightComfort * comfort) / w;
  }
};

inline double at_fault_collisions(const SimLog& log) {
  for (const auto& e : log.collisions)
    if (e.at_fault) return 0.0;
  return 1.0;
}

inline double drivable_compliance(const SimLog& log) { return log.off_drivable.empty() ? 1.0 : 0.0; }

/// First time in [0, limit) at which the two boxes, moving at constant speed
/// and heading, touch; returns limit when they do not.
inline double contact_time(const TrajPoint& a, const Extent& ea, const TrajPoint& b, const Extent& eb, double limit,
                           double resolution) {
  const double ca = std::cos(a.heading), sa = std::sin(a.heading);
  const double cb = std::cos(b.heading), sb = std::sin(b.heading);
  const std::size_t n = static_cast<std::size_t>(std::ceil(limit / resolution));
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * resolution;
    const Pose2 pa{a.x + a.speed * ca * t, a.y + a.speed * sa * t, a.heading};
    const Pose2 pb{b.x + b.speed * cb * t, b.y + b.speed * sb * t, b.heading};
    if (obb_overlap(pa, ea, pb, eb)) return t;
  }
  return limit;
}

inline double ttc_within_bound(const SimLog& log, const MetricConfig& cfg = {}) {
  for (std::size_t t = 0; t < log.ego.size(); ++t)
    for (std::size_t i = 0; i < log.agents.size(); ++i)
      if (contact_time(log.ego[t], log.ego_extent, log.agents[i][t], log.agent_extents[i], cfg.ttc_bound,
                       cfg.ttc_resolution) < cfg.ttc_bound)
        return 0.0;
  return 1.0;
}

/// Station of the ego along the expert route, tracked monotonically so a
/// route that passes near itself is not short-cut.
inline double progress(const SimLog& log, const std::vector<Vec2>& route) {
  if (route.size() < 2) throw InvalidArgument("progress: route needs two points");
  std::vector<double> cum(route.size(), 0.0);
  for (std::size_t i = 1; i < route.size(); ++i) cum[i] = cum[i - 1] + norm(route[i] - route[i - 1]);
  const double total = cum.back();
  if (!(total > 0.0)) return 1.0;
  std::size_t seg = 0;
  double station = 0.0;
  for (const auto& p : log.ego) {
    const Vec2 q{p.x, p.y};
    double best = 1e300;
    std::size_t best_seg = seg;
    double best_station = station;
    // Search forward from the current segment, over a bounded window.
    for (std::size_t s = seg; s + 1 < route.size() && cum[s] <= station + 20.0; ++s) {
      const Vec2 a = route[s], b = route[s + 1];
      const Vec2 ab = b - a;
      const double len2 = dot(ab, ab);
      const double u = len2 > 0 ? std::clamp(dot(q - a, ab) / len2, 0.0, 1.0) : 0.0;
      const Vec2 c{a.x + u * ab.x, a.y + u * ab.y};
      const double d = norm(q - c);
      if (d < best) {
        best = d;
        best_seg = s;
        best_station = cum[s] + u * std::sqrt(len2);
      }
    }
    if (best_station >= station) {
      station = best_station;
      seg = best_seg;
    }
  }
  return std::clamp(station / total, 0.0, 1.0);
}

/// Expert route of a scene: start position then the logged ego future over
/// `steps` steps.
inline std::vector<Vec2> expert_route(const Scene& world, std::size_t steps) {
  if (!world.ego_future_gt || world.ego_future_gt->size() < steps)
    throw InvalidArgument("progress: ego log shorter than the horizon");
  std::vector<Vec2> r{{world.ego.pose.x, world.ego.pose.y}};
  for (std::size_t i = 0; i < steps; ++i) r.push_back({(*world.ego_future_gt)[i].x, (*world.ego_future_gt)[i].y});
  return r;
}

/// Speed limit in force at p: that of the nearest lane centre with a limit.
inline std::optional<double> speed_limit_at(const std::vector<MapPolyline>& map, Vec2 p) {
  std::optional<double> lim;
  double best = 1e300;
  for (const auto& m : map) {
    if (m.kind != PolylineKind::LaneCenter || !m.speed_limit) continue;
    for (std::size_t i = 0; i + 1 < m.points.size(); ++i) {
      const double d = segment_distance(p, m.points[i], m.points[i + 1]);
      if (d < best) {
        best = d;
        lim = m.speed_limit;
      }
    }
  }
  return lim;
}

/// 1 minus the time-averaged overspeed fraction (v - limit) / limit, each
/// step capped at 1.
inline double speed_compliance(const SimLog& log, const std::vector<MapPolyline>& map) {
  if (log.ego.size() < 2) return 1.0;
  double sum = 0.0;
  for (std::size_t t = 1; t < log.ego.size(); ++t) {
    const auto& p = log.ego[t];
    const auto lim = speed_limit_at(map, {p.x, p.y});
    if (!lim || *lim <= 0.0) continue;
    sum += std::min(1.0, std::max(0.0, p.speed - *lim) / *lim);
  }
  return std::clamp(1.0 - sum / static_cast<double>(log.ego.size() - 1), 0.0, 1.0);
}

struct Kinematics {
  std::vector<double> lon_accel, lat_accel, jerk, yaw_rate, yaw_accel;
};

/// Finite-difference kinematics of the ego log.
inline Kinematics ego_kinematics(const SimLog& log) {
  Kinematics k;
  const double dt = log.dt;
  const auto& e = log.ego;
  for (std::size_t t = 1; t < e.size(); ++t) {
    k.lon_accel.push_back((e[t].speed - e[t - 1].speed) / dt);
    const double w = wrap_angle(e[t].heading - e[t - 1].heading) / dt;
    k.yaw_rate.push_back(w);
    k.lat_accel.push_back(e[t].speed * w);
  }
  for (std::size_t t = 1; t < k.lon_accel.size(); ++t) {
    k.jerk.push_back((k.lon_accel[t] - k.lon_accel[t - 1]) / dt);
    k.yaw_accel.push_back((k.yaw_rate[t] - k.yaw_rate[t - 1]) / dt);
  }
  return k;
}

inline double comfort(const SimLog& log, const ComfortLimits& lim = {}) {
  const Kinematics k = ego_kinematics(log);
  auto within = [](const std::vector<double>& v, double bound) {
    for (double x : v)
      if (std::abs(x) > bound) return false;
    return true;
  };
  return within(k.lon_accel, lim.lon_accel) && within(k.lat_accel, lim.lat_accel) && within(k.jerk, lim.jerk) &&
                 within(k.yaw_rate, lim.yaw_rate) && within(k.yaw_accel, lim.yaw_accel)
             ? 1.0
             : 0.0;
}

inline MetricReport evaluate_log(const SimLog& log, const Scene& world, const MetricConfig& cfg = {}) {
  MetricReport r;
  r.collisions = at_fault_collisions(log);
  r.drivable = drivable_compliance(log);
  r.ttc = ttc_within_bound(log, cfg);
  r.progress = progress(log, expert_route(world, log.steps));
  r.speed = speed_compliance(log, world.map);
  r.comfort = comfort(log, cfg.comfort);
  return r;
}

// ---------------------------------------------------------------- tables

struct ScoreRow {
  ScenarioType type = ScenarioType::Others;
  std::size_t runs = 0;
  MetricReport mean;
  double composite = 0.0;  // mean of per-run composites
};

/// Per-type means; always seven rows in scenario index order.
inline std::vector<ScoreRow> score_table(const std::vector<std::pair<ScenarioType, MetricReport>>& runs) {
  std::vector<ScoreRow> rows(kNumScenarioTypes);
  for (auto t : kAllScenarioTypes) {
    auto& row = rows[static_cast<std::size_t>(index_of(t))];
    row.type = t;
    row.mean = {0, 0, 0, 0, 0, 0};
  }
  for (const auto& [t, m] : runs) {
    auto& row = rows[static_cast<std::size_t>(index_of(t))];
    ++row.runs;
    row.mean.collisions += m.collisions;
    row.mean.drivable += m.drivable;
    row.mean.ttc += m.ttc;
    row.mean.progress += m.progress;
    row.mean.speed += m.speed;
    row.mean.comfort += m.comfort;
    row.composite += m.composite();
  }
  for (auto& row : rows) {
    if (row.runs == 0) continue;
    const double inv = 1.0 / static_cast<double>(row.runs);
    for (double* v : {&row.mean.collisions, &row.mean.drivable, &row.mean.ttc, &row.mean.progress, &row.mean.speed,
                      &row.mean.comfort, &row.composite})
      *v *= inv;
  }
  return rows;
}

/// Mean composite over all runs.
inline double overall_composite(const std::vector<std::pair<ScenarioType, MetricReport>>& runs) {
  if (runs.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : runs) s += r.second.composite();
  return s / static_cast<double>(runs.size());
}

inline std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

inline std::string score_table_csv(const std::vector<ScoreRow>& rows) {
  std::string out = "scenario,runs,collisions,drivable,ttc,progress,speed,comfort,composite\n";
  for (const auto& r : rows) {
    out += std::string(to_string(r.type)) + "," + std::to_string(r.runs);
    if (r.runs == 0) {
      out += ",,,,,,,\n";
      continue;
    }
    for (double v : {r.mean.collisions, r.mean.drivable, r.mean.ttc, r.mean.progress, r.mean.speed, r.mean.comfort,
                     r.composite})
      out += "," + fixed(v);
    out += "\n";
  }
  return out;
}

/// Grouped bar chart: one group per scenario type, one bar per metric.
inline std::string score_table_svg(const std::vector<ScoreRow>& rows, const std::string& title = "Closed-loop scores") {
  const char* names[] = {"collisions", "drivable", "ttc", "progress", "speed", "comfort", "composite"};
  const char* colors[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#222222"};
  const double group_w = 120, bar_w = 14, h = 200, top = 40, left = 50;
  const double width = left + group_w * static_cast<double>(rows.size()) + 20;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << top + h + 90
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top + h << "\" x2=\"" << width - 10 << "\" y2=\"" << top + h
     << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double y = top + h - h * tick / 4.0;
    os << "<text x=\"" << left - 30 << "\" y=\"" << y + 4 << "\">" << fixed(tick / 4.0, 2) << "</text>\n";
  }
  for (std::size_t g = 0; g < rows.size(); ++g) {
    const auto& r = rows[g];
    const double values[] = {r.mean.collisions, r.mean.drivable, r.mean.ttc,     r.mean.progress,
                             r.mean.speed,      r.mean.comfort,  r.composite};
    const double x0 = left + group_w * static_cast<double>(g) + 8;
    for (int m = 0; m < 7; ++m) {
      const double v = r.runs ? std::clamp(values[m], 0.0, 1.0) : 0.0;
      os << "<rect x=\"" << x0 + bar_w * m << "\" y=\"" << top + h - h * v << "\" width=\"" << bar_w - 2
         << "\" height=\"" << h * v << "\" fill=\"" << colors[m] << "\"/>\n";
    }
    os << "<text x=\"" << x0 << "\" y=\"" << top + h + 15 << "\">" << to_string(r.type) << "</text>\n";
    os << "<text x=\"" << x0 << "\" y=\"" << top + h + 28 << "\">n=" << r.runs << "</text>\n";
  }
  for (int m = 0; m < 7; ++m) {
    const double x = left + 90.0 * m;
    os << "<rect x=\"" << x << "\" y=\"" << top + h + 45 << "\" width=\"10\" height=\"10\" fill=\"" << colors[m]
       << "\"/><text x=\"" << x + 14 << "\" y=\"" << top + h + 54 << "\">" << names[m] << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace emoe::sim
