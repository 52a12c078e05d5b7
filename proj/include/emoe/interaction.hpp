#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "emoe/common.hpp"
#include "emoe/geometry.hpp"
#include "emoe/scenario.hpp"

namespace emoe {

enum class InteractionLabel { Overtake, Yield };

inline std::string_view to_string(InteractionLabel l) { return l == InteractionLabel::Overtake ? "overtake" : "yield"; }

struct AgentInteraction {
  std::string agent_id;
  int t_in = 0;   // 1-based agent step of the earliest conflict
  int t_out = 0;  // 1-based agent step of the latest conflict
  InteractionLabel label = InteractionLabel::Yield;

  friend bool operator==(const AgentInteraction&, const AgentInteraction&) = default;
};

/// Step ranges of the planning horizon in which the ego interacts with at
/// least one agent, plus the per-agent ranges they were merged from.
struct InteractionIntervals {
  std::vector<std::pair<int, int>> spans;  // sorted, disjoint, inclusive, 1-based
  std::vector<AgentInteraction> per_agent;

  bool contains(int t) const {
    for (auto [a, b] : spans)
      if (t >= a && t <= b) return true;
    return false;
  }

  friend bool operator==(const InteractionIntervals&, const InteractionIntervals&) = default;
};

/// Footprint margin of the conflict predicate, metres.
inline constexpr double kInteractionMargin = 0.5;

/// Sorts and merges inclusive step intervals into maximal runs; touching
/// intervals such as (1, 5) and (6, 9) become (1, 9).
inline std::vector<std::pair<int, int>> merge_spans(std::vector<std::pair<int, int>> spans) {
  std::sort(spans.begin(), spans.end());
  std::vector<std::pair<int, int>> out;
  for (auto s : spans) {
    if (!out.empty() && s.first <= out.back().second + 1)
      out.back().second = std::max(out.back().second, s.second);
    else
      out.push_back(s);
  }
  return out;
}

/// Space-time conflict extraction. An (ego step, agent step) pair conflicts
/// when the two footprints overlap with `margin`; agent steps bound each
/// agent's interval, and the earliest conflict decides overtake (ego first)
/// versus yield.
inline InteractionIntervals extract_intervals(const Trajectory& ego_future, const Extent& ego_extent,
                                              const std::vector<Agent>& agents,
                                              double margin = kInteractionMargin) {
  const std::size_t n = ego_future.size();
  std::vector<Pose2> ego(n);
  Vec2 lo{1e300, 1e300}, hi{-1e300, -1e300};
  for (std::size_t t = 0; t < n; ++t) {
    ego[t] = ego_future[t].pose();
    lo = {std::min(lo.x, ego[t].x), std::min(lo.y, ego[t].y)};
    hi = {std::max(hi.x, ego[t].x), std::max(hi.y, ego[t].y)};
  }
  const double ego_r = 0.5 * std::hypot(ego_extent.length + margin, ego_extent.width + margin);

  InteractionIntervals out;
  std::vector<std::pair<int, int>> raw;
  for (const auto& agent : agents) {
    if (!agent.future_gt) throw InvalidArgument("extract_intervals: agent " + agent.id + " has no future");
    const auto& fut = *agent.future_gt;
    if (fut.size() != n) throw InvalidArgument("extract_intervals: horizon mismatch for agent " + agent.id);
    if (std::abs(fut.dt - ego_future.dt) > 1e-12) throw InvalidArgument("extract_intervals: dt mismatch");
    const double reach =
        ego_r + 0.5 * std::hypot(agent.extent.length + margin, agent.extent.width + margin);

    // Earliest ego step conflicting with agent step ta, or -1.
    auto first_ego_step = [&](std::size_t ta) -> long {
      const Pose2 pa = fut[ta].pose();
      if (pa.x < lo.x - reach || pa.x > hi.x + reach || pa.y < lo.y - reach || pa.y > hi.y + reach) return -1;
      for (std::size_t te = 0; te < n; ++te)
        if (obb_overlap(ego[te], ego_extent, pa, agent.extent, margin)) return static_cast<long>(te);
      return -1;
    };

    long t_in = -1, te_first = -1, t_out = -1;
    for (std::size_t ta = 0; ta < n && t_in < 0; ++ta) {
      const long te = first_ego_step(ta);
      if (te >= 0) {
        t_in = static_cast<long>(ta);
        te_first = te;
      }
    }
    if (t_in < 0) continue;
    for (std::size_t ta = n; ta-- > static_cast<std::size_t>(t_in);) {
      if (first_ego_step(ta) >= 0) {
        t_out = static_cast<long>(ta);
        break;
      }
    }
    AgentInteraction ai;
    ai.agent_id = agent.id;
    ai.t_in = static_cast<int>(t_in) + 1;
    ai.t_out = static_cast<int>(t_out) + 1;
    ai.label = te_first < t_in ? InteractionLabel::Overtake : InteractionLabel::Yield;
    out.per_agent.push_back(ai);
    raw.emplace_back(ai.t_in, ai.t_out);
  }
  out.spans = merge_spans(std::move(raw));
  return out;
}

/// Convenience overload over the first `horizon` steps of a scene's logs.
inline InteractionIntervals extract_intervals(const Scene& scene, std::size_t horizon,
                                              double margin = kInteractionMargin) {
  if (!scene.ego_future_gt) throw InvalidArgument("extract_intervals: scene has no ego future");
  std::vector<Agent> agents;
  agents.reserve(scene.agents.size());
  for (const auto& a : scene.agents) {
    if (!a.future_gt) continue;
    Agent b = a;
    b.future_gt = a.future_gt->head(horizon);
    agents.push_back(std::move(b));
  }
  return extract_intervals(scene.ego_future_gt->head(horizon), scene.ego.extent, agents, margin);
}

struct WeightVector {
  std::vector<double> w;  // w[t - 1] is the weight of step t

  std::size_t size() const { return w.size(); }
  double operator[](std::size_t i) const { return w[i]; }
};

/// exp(-k_R * t) decay over 1-based steps, overridden to 1 inside spans.
inline WeightVector temporal_weights(std::size_t horizon, double k_r, const InteractionIntervals& intervals) {
  if (k_r < 0.0) throw InvalidArgument("temporal_weights: k_R must be non-negative");
  WeightVector v;
  v.w.resize(horizon);
  for (std::size_t i = 0; i < horizon; ++i) {
    const int t = static_cast<int>(i) + 1;
    v.w[i] = intervals.contains(t) ? 1.0 : std::exp(-k_r * static_cast<double>(t));
  }
  return v;
}

struct L1Result {
  double loss = 0.0;
  std::vector<std::array<double, 4>> grad;  // d loss / d (x, y, heading, speed) per step
};

/// Mean over steps and the four channels of w_t * |pred - gt|; the heading
/// residual is wrapped. Subgradient 0 at exact equality.
inline L1Result weighted_l1(const Trajectory& pred, const Trajectory& gt, const WeightVector& w) {
  if (pred.size() != gt.size() || w.size() != pred.size())
    throw InvalidArgument("weighted_l1: shape mismatch (" + std::to_string(pred.size()) + ", " +
                          std::to_string(gt.size()) + ", " + std::to_string(w.size()) + ")");
  L1Result r;
  r.grad.resize(pred.size());
  if (pred.empty()) return r;
  const double norm_c = 1.0 / (4.0 * static_cast<double>(pred.size()));
  auto sgn = [](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); };
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const std::array<double, 4> d = {pred[t].x - gt[t].x, pred[t].y - gt[t].y,
                                     wrap_angle(pred[t].heading - gt[t].heading), pred[t].speed - gt[t].speed};
    for (int c = 0; c < 4; ++c) {
      r.loss += w[t] * std::abs(d[c]);
      r.grad[t][c] = w[t] * sgn(d[c]) * norm_c;
    }
  }
  r.loss *= norm_c;
  return r;
}

/// Debug record used by the `label` command.
inline nlohmann::json intervals_to_json(std::size_t scene_index, const InteractionIntervals& iv) {
  nlohmann::json j;
  j["scene"] = scene_index;
  j["spans"] = nlohmann::json::array();
  for (auto [a, b] : iv.spans) j["spans"].push_back({a, b});
  j["agents"] = nlohmann::json::array();
  for (const auto& a : iv.per_agent)
    j["agents"].push_back({{"id", a.agent_id}, {"t_in", a.t_in}, {"t_out", a.t_out}, {"label", to_string(a.label)}});
  return j;
}

}  // namespace emoe
