#pragma once

#include <cmath>
#include <string>

#include "emoe/nn/tensor.hpp"
#include "emoe/planner/net_config.hpp"
#include "emoe/scenario.hpp"

namespace emoe {

/// Raw per-entity input rows for the encoders. Coordinates are assumed to be
/// in the ego frame already.
namespace features {

inline constexpr std::size_t kEgoWidth = 5;       // speed, accel, steering, length, width
inline constexpr std::size_t kAgentCoords = 2;    // x, y (Fourier-embedded)
inline constexpr std::size_t kAgentExtra = 8;     // cos, sin, speed, 3 kind, length, valid
inline constexpr std::size_t kStaticWidth = 9;    // x, y, cos, sin, length, width, 3 kind
inline constexpr std::size_t kMapWidth = 14;      // x, y, dir x, dir y, 4 kind, route, limit, has limit, 3 region

inline constexpr double kPosNorm = 20.0;
inline constexpr double kSpeedNorm = 10.0;

inline void check_caps(const Scene& s, const SceneLimits& lim) {
  auto over = [](const char* what, std::size_t n, std::size_t cap) {
    if (n > cap)
      throw InvalidArgument(std::string("scene has ") + std::to_string(n) + " " + what + ", cap is " +
                            std::to_string(cap));
  };
  over("agents", s.agents.size(), lim.max_agents);
  over("statics", s.statics.size(), lim.max_statics);
  over("polylines", s.map.size(), lim.max_polylines);
}

inline nn::Mat ego(const Scene& s) {
  nn::Mat m(1, kEgoWidth);
  m(0, 0) = s.ego.pose.speed / kSpeedNorm;
  m(0, 1) = s.ego.acceleration / 3.0;
  m(0, 2) = s.ego.steering;
  m(0, 3) = s.ego.extent.length / 5.0;
  m(0, 4) = s.ego.extent.width / 2.0;
  return m;
}

/// Channels of the ego row that state dropout zeroes.
inline std::vector<std::size_t> ego_kinematic_channels() { return {0, 1, 2}; }

/// T_h rows per agent, oldest first; short histories are front-padded with
/// invalid rows.
inline nn::Mat agent_steps(const Scene& s, std::size_t t_h) {
  nn::Mat m(s.agents.size() * t_h, kAgentCoords + kAgentExtra);
  for (std::size_t a = 0; a < s.agents.size(); ++a) {
    const auto& ag = s.agents[a];
    const auto& h = ag.history.points;
    if (h.size() > t_h) throw InvalidArgument("agent " + ag.id + " history longer than T_h");
    const std::size_t pad = t_h - h.size();
    for (std::size_t k = 0; k < h.size(); ++k) {
      double* r = m.row(a * t_h + pad + k);
      r[0] = h[k].x;
      r[1] = h[k].y;
      r[2] = std::cos(h[k].heading);
      r[3] = std::sin(h[k].heading);
      r[4] = h[k].speed / kSpeedNorm;
      r[5 + static_cast<int>(ag.kind)] = 1.0;
      r[8] = ag.extent.length / 5.0;
      r[9] = 1.0;
    }
  }
  return m;
}

inline nn::Mat statics(const Scene& s) {
  nn::Mat m(s.statics.size(), kStaticWidth);
  for (std::size_t i = 0; i < s.statics.size(); ++i) {
    const auto& st = s.statics[i];
    double* r = m.row(i);
    r[0] = st.pose.x / kPosNorm;
    r[1] = st.pose.y / kPosNorm;
    r[2] = std::cos(st.pose.heading);
    r[3] = std::sin(st.pose.heading);
    r[4] = st.extent.length / 5.0;
    r[5] = st.extent.width / 5.0;
    r[6 + static_cast<int>(st.kind)] = 1.0;
  }
  return m;
}

inline nn::Mat map_points(const Scene& s, std::size_t l_p) {
  nn::Mat m(s.map.size() * l_p, kMapWidth);
  for (std::size_t i = 0; i < s.map.size(); ++i) {
    const auto& pl = s.map[i];
    if (pl.points.size() != l_p)
      throw InvalidArgument("polyline " + std::to_string(i) + " has " + std::to_string(pl.points.size()) +
                            " points, expected " + std::to_string(l_p));
    for (std::size_t k = 0; k < l_p; ++k) {
      double* r = m.row(i * l_p + k);
      const Vec2 p = pl.points[k];
      const Vec2 q = k + 1 < l_p ? pl.points[k + 1] : pl.points[k];
      const Vec2 o = k + 1 < l_p ? pl.points[k] : pl.points[k - 1];
      const Vec2 dir = q - o;
      const double n = norm(dir);
      r[0] = p.x / kPosNorm;
      r[1] = p.y / kPosNorm;
      r[2] = n > 0 ? dir.x / n : 0.0;
      r[3] = n > 0 ? dir.y / n : 0.0;
      r[4 + static_cast<int>(pl.kind)] = 1.0;
      r[8] = pl.on_route ? 1.0 : 0.0;
      r[9] = pl.speed_limit ? *pl.speed_limit / kPosNorm : 0.0;
      r[10] = pl.speed_limit ? 1.0 : 0.0;
      r[11 + static_cast<int>(pl.region)] = 1.0;
    }
  }
  return m;
}

}  // namespace features
}  // namespace emoe
