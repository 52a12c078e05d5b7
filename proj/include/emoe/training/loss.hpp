#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "emoe/anchor_bank.hpp"
#include "emoe/interaction.hpp"
#include "emoe/labeler.hpp"
#include "emoe/planner/network.hpp"

namespace emoe {

struct LossWeights {
  double reg = 1.0;
  double cls = 0.3;
  double col = 1.0;
  double pred = 0.5;
  double router = 0.1;
};

struct LossReport {
  double total = 0.0;
  double reg = 0.0;
  double cls = 0.0;
  double col = 0.0;
  double pred = 0.0;
  double router = 0.0;
  LossWeights weights;
  bool router_correct = false;
  // Smallest distance of any L1 residual or hinge argument from its kink.
  double kink_margin = std::numeric_limits<double>::infinity();
};

/// Per-sample supervision derived from a labeled ego-frame scene.
struct SampleTargets {
  ScenarioType label = ScenarioType::Others;
  Trajectory ego_gt;           // T_f steps
  Extent ego_extent;
  WeightVector weights;
  std::size_t target_mode = 0;
  std::vector<Trajectory> agent_gt;  // T_f steps, scene agent order
  std::vector<Extent> agent_extent;
};

inline constexpr double kCollisionMargin = 0.2;

/// `interaction_weights` false gives uniform step weights.
inline SampleTargets make_targets(const Scene& s, const AnchorBank& bank, std::size_t t_f, double k_r,
                                  bool interaction_weights = true) {
  if (!s.ego_future_gt) throw InvalidArgument("training sample has no ego ground truth");
  SampleTargets t;
  t.label = s.label ? *s.label : label_scenario(s);
  t.ego_gt = s.ego_future_gt->head(t_f);
  t.ego_extent = s.ego.extent;
  for (const auto& a : s.agents) {
    if (!a.future_gt) throw InvalidArgument("training sample agent " + a.id + " has no future");
    t.agent_gt.push_back(a.future_gt->head(t_f));
    t.agent_extent.push_back(a.extent);
  }
  if (interaction_weights) {
    t.weights = temporal_weights(t_f, k_r, extract_intervals(s, t_f));
  } else {
    t.weights.w.assign(t_f, 1.0);
  }
  const auto& end = t.ego_gt.points.back();
  t.target_mode = nearest_anchor(bank.slice(t.label), {end.x, end.y});
  return t;
}

namespace detail {

// Three circles covering a box: centres at -L/3, 0, +L/3 along the heading.
inline double cover_radius(const Extent& e) { return std::hypot(e.length / 6.0, e.width / 2.0); }

inline double cross_entropy(const double* logits, std::size_t n, std::size_t target, double* grad) {
  double mx = logits[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) z += std::exp(logits[i] - mx);
  const double lse = mx + std::log(z);
  for (std::size_t i = 0; i < n; ++i) grad[i] = std::exp(logits[i] - lse) - (i == target ? 1.0 : 0.0);
  return lse - logits[target];
}

}  // namespace detail

/// Collision hinge between the predicted ego footprint and agent ground-truth
/// footprints at each step. Returns the mean over steps; adds d/d(x, y,
/// heading) into grad (4 channels per step, speed untouched).
inline double collision_loss(const Trajectory& pred, const SampleTargets& tg, std::vector<std::array<double, 4>>& grad,
                             double& kink) {
  const std::size_t n = pred.size();
  grad.assign(n, {0, 0, 0, 0});
  if (n == 0) return 0.0;
  const double re = detail::cover_radius(tg.ego_extent);
  const double oe[3] = {-tg.ego_extent.length / 3.0, 0.0, tg.ego_extent.length / 3.0};
  double loss = 0.0;
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t a = 0; a < tg.agent_gt.size(); ++a) {
    const double ra = detail::cover_radius(tg.agent_extent[a]);
    const double oa[3] = {-tg.agent_extent[a].length / 3.0, 0.0, tg.agent_extent[a].length / 3.0};
    const double reach = re + ra + kCollisionMargin;
    for (std::size_t t = 0; t < n; ++t) {
      const TrajPoint& p = pred[t];
      const TrajPoint& q = tg.agent_gt[a][t];
      const double dx0 = p.x - q.x, dy0 = p.y - q.y;
      const double far = reach + 0.5 * (tg.ego_extent.length + tg.agent_extent[a].length);
      if (dx0 * dx0 + dy0 * dy0 > far * far) continue;
      const double ce = std::cos(p.heading), se = std::sin(p.heading);
      const double ca = std::cos(q.heading), sa = std::sin(q.heading);
      for (double ei : oe)
        for (double aj : oa) {
          const double dx = (p.x + ei * ce) - (q.x + aj * ca);
          const double dy = (p.y + ei * se) - (q.y + aj * sa);
          const double dist = std::hypot(dx, dy);
          const double arg = reach - dist;
          kink = std::min(kink, std::abs(arg));
          if (arg <= 0.0 || dist == 0.0) continue;
          loss += arg * inv;
          const double gx = -dx / dist * inv, gy = -dy / dist * inv;
          grad[t][0] += gx;
          grad[t][1] += gy;
          grad[t][2] += gx * (-ei * se) + gy * (ei * ce);
        }
    }
  }
  return loss;
}

/// Evaluates every loss term on the values of a forward pass and, when
/// `seed` is set, seeds their gradients into the graph (call backward after).
inline LossReport total_loss(nn::Graph& g, const ForwardResult& f, const SampleTargets& tg, const LossWeights& w,
                             bool seed = true) {
  LossReport rep;
  rep.weights = w;
  const nn::Mat& modes = g.value(f.ego_modes);
  const std::size_t t_f = modes.cols / 4;
  if (tg.ego_gt.size() != t_f) throw InvalidArgument("total_loss: horizon mismatch");
  const std::size_t k = tg.target_mode;
  const Trajectory pred = EMoEPlanner::row_to_traj(modes, k, tg.ego_gt.dt);

  // Regression on the target mode.
  const auto l1 = weighted_l1(pred, tg.ego_gt, tg.weights);
  rep.reg = l1.loss;
  for (std::size_t t = 0; t < t_f; ++t) {
    const TrajPoint &p = pred[t], &q = tg.ego_gt[t];
    const double dh = wrap_angle(p.heading - q.heading);
    for (double r : {p.x - q.x, p.y - q.y, dh, p.speed - q.speed}) rep.kink_margin = std::min(rep.kink_margin, std::abs(r));
    rep.kink_margin = std::min(rep.kink_margin, kPi - std::abs(dh));
  }

  // Mode classification.
  const nn::Mat& ml = g.value(f.mode_logits);
  std::vector<double> cls_grad(ml.rows);
  rep.cls = detail::cross_entropy(ml.d.data(), ml.rows, k, cls_grad.data());

  // Collision hinge on the target mode.
  std::vector<std::array<double, 4>> col_grad;
  rep.col = collision_loss(pred, tg, col_grad, rep.kink_margin);

  // Agent prediction.
  std::optional<nn::Mat> pred_grad;
  if (f.agent_preds) {
    const nn::Mat& ap = g.value(*f.agent_preds);
    if (ap.rows != tg.agent_gt.size()) throw InvalidArgument("total_loss: agent count mismatch");
    pred_grad = nn::Mat(ap.rows, ap.cols);
    const double inv = 1.0 / static_cast<double>(ap.size());
    for (std::size_t a = 0; a < ap.rows; ++a)
      for (std::size_t t = 0; t < t_f; ++t) {
        const double r[2] = {ap(a, 2 * t) - tg.agent_gt[a][t].x, ap(a, 2 * t + 1) - tg.agent_gt[a][t].y};
        for (int c = 0; c < 2; ++c) {
          rep.pred += std::abs(r[c]) * inv;
          rep.kink_margin = std::min(rep.kink_margin, std::abs(r[c]));
          (*pred_grad)(a, 2 * t + c) = (r[c] > 0 ? 1.0 : (r[c] < 0 ? -1.0 : 0.0)) * inv;
        }
      }
  }

  // Router.
  const nn::Mat& rl = g.value(f.router_logits);
  std::array<double, kNumScenarioTypes> router_grad{};
  rep.router = detail::cross_entropy(rl.d.data(), kNumScenarioTypes, static_cast<std::size_t>(index_of(tg.label)),
                                     router_grad.data());
  rep.router_correct = argmax_lowest(rl.d.data(), kNumScenarioTypes) == static_cast<std::size_t>(index_of(tg.label));

  rep.total = w.reg * rep.reg + w.cls * rep.cls + w.col * rep.col + w.pred * rep.pred + w.router * rep.router;

  if (seed) {
    nn::Mat gm(modes.rows, modes.cols);
    for (std::size_t t = 0; t < t_f; ++t)
      for (int c = 0; c < 4; ++c) gm(k, 4 * t + c) = w.reg * l1.grad[t][c] + w.col * col_grad[t][c];
    g.seed(f.ego_modes, gm);
    nn::Mat gl(ml.rows, 1);
    for (std::size_t i = 0; i < ml.rows; ++i) gl.d[i] = w.cls * cls_grad[i];
    g.seed(f.mode_logits, gl);
    if (pred_grad) {
      for (double& v : pred_grad->d) v *= w.pred;
      g.seed(*f.agent_preds, *pred_grad);
    }
    nn::Mat gr(1, kNumScenarioTypes);
    for (std::size_t i = 0; i < kNumScenarioTypes; ++i) gr.d[i] = w.router * router_grad[i];
    g.seed(f.router_logits, gr);
  }
  return rep;
}

}  // namespace emoe
