#pragma once

#include <algorithm>
#include <cmath>

#include "emoe/scenario.hpp"

namespace emoe {

/// Thresholds of the rule table, in degrees of net heading change.
struct LabelRules {
  double straight_max_deg = 15.0;
  double turn_max_deg = 135.0;
  std::size_t horizon_steps = 80;
};

/// Net heading change over the labeled horizon, accumulated step by step so
/// that loops and U-turns are not folded back by angle wrapping.
inline double net_heading_change(const Scene& scene, std::size_t horizon_steps) {
  if (!scene.ego_future_gt || scene.ego_future_gt->empty())
    throw InvalidArgument("label_scenario: scene has no ground-truth ego future");
  const auto& pts = scene.ego_future_gt->points;
  const std::size_t n = std::min(horizon_steps, pts.size());
  double prev = scene.ego.pose.heading, total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += wrap_angle(pts[i].heading - prev);
    prev = pts[i].heading;
  }
  return total;
}

/// Deterministic rule-based scenario label.
///
/// Rules, first match wins:
///   1. an on-route lane centre marked merge or split          -> Others
///   2. an on-route lane centre inside a roundabout            -> Roundabout
///   3. |net heading change| > turn_max_deg                     -> UTurn
///   4. an on-route lane centre inside a junction:
///        |change| < straight_max_deg                           -> StraightJunction
///        change > 0 (counter-clockwise)                        -> LeftTurnJunction
///        otherwise                                             -> RightTurnJunction
///   5. |change| < straight_max_deg                             -> Straight
///   6.                                                         -> Others
inline ScenarioType label_scenario(const Scene& scene, const LabelRules& rules = {}) {
  const double change = net_heading_change(scene, rules.horizon_steps);
  const double deg = std::abs(change) * 180.0 / kPi;

  bool merge_split = false, roundabout = false, junction = false;
  for (const auto& m : scene.map) {
    if (!m.on_route || m.kind != PolylineKind::LaneCenter) continue;
    merge_split |= m.topology != LaneTopology::Simple;
    roundabout |= m.region == MapRegion::Roundabout;
    junction |= m.region == MapRegion::Junction;
  }

  if (merge_split) return ScenarioType::Others;
  if (roundabout) return ScenarioType::Roundabout;
  if (deg > rules.turn_max_deg) return ScenarioType::UTurn;
  if (junction) {
    if (deg < rules.straight_max_deg) return ScenarioType::StraightJunction;
    return change > 0.0 ? ScenarioType::LeftTurnJunction : ScenarioType::RightTurnJunction;
  }
  if (deg < rules.straight_max_deg) return ScenarioType::Straight;
  return ScenarioType::Others;
}

}  // namespace emoe
