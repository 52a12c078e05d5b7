#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "emoe/anchor_bank.hpp"
#include "emoe/nn/graph.hpp"
#include "emoe/nn/layers.hpp"
#include "emoe/planner/features.hpp"
#include "emoe/planner/net_config.hpp"
#include "emoe/scenario.hpp"

namespace emoe {

struct RouterOutput {
  std::array<double, kNumScenarioTypes> logits{};
  ScenarioType chosen = ScenarioType::Others;
};

struct PlannerOutput {
  std::vector<Trajectory> ego_modes;
  std::vector<double> mode_probs;
  std::vector<std::vector<Vec2>> agent_preds;  // one per scene agent, T_f positions
  std::vector<char> agent_valid;               // padded to the agent cap
  RouterOutput router;
};

struct ForwardOptions {
  bool training = false;                    // enables state dropout
  std::optional<ScenarioType> force_route;  // teacher forcing
  std::optional<std::size_t> pred_mode;     // ego mode fed to the prediction decoder; argmax if unset
  std::uint64_t dropout_seed = 0;
};

/// Graph handles produced by one forward pass.
struct ForwardResult {
  nn::Var tokens;                 // scene encoding, tokens x D
  std::vector<char> token_valid;
  nn::Var router_logits;          // 1 x 7
  ScenarioType chosen = ScenarioType::Others;
  std::size_t expert = 0;         // expert index that ran
  nn::Var queries;                // K_a x D mode queries
  nn::Var mode_features;          // K_a x D after the decoder
  nn::Var ego_modes;              // K_a x 4 T_f
  nn::Var mode_logits;            // K_a x 1
  std::size_t pred_mode = 0;
  std::size_t n_agents = 0;
  std::optional<nn::Var> agent_preds;  // n_agents x 2 T_f
};

inline std::size_t argmax_lowest(const double* v, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

/// Mode whose anchor is nearest to the ground-truth endpoint (lowest index on ties).
inline std::size_t nearest_anchor(std::span<const Vec2> anchors, Vec2 endpoint) {
  std::size_t best = 0;
  double bd = 1e300;
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    const double d = dot(anchors[k] - endpoint, anchors[k] - endpoint);
    if (d < bd) {
      bd = d;
      best = k;
    }
  }
  return best;
}

class EMoEPlanner {
 public:
  explicit EMoEPlanner(const NetConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(cfg_.init_seed);
    const std::size_t d = cfg_.d;
    ego_enc_ = nn::StateDropoutEncoder(ps_, "enc.ego", features::kEgoWidth, d, features::ego_kinematic_channels(), rng);
    agent_fope_ = nn::FoPE(ps_, "enc.agent.fope", features::kAgentCoords, features::kAgentExtra, d, rng);
    agent_mixer_ = nn::Mixer(ps_, "enc.agent.mixer", cfg_.t_h(), cfg_.mixer_token_hidden, d, d, rng);
    static_enc_ = nn::Mlp(ps_, "enc.static", features::kStaticWidth, d, d, rng);
    map_proj_ = nn::Linear(ps_, "enc.map.proj", features::kMapWidth, d, rng);
    map_mixer_ = nn::Mixer(ps_, "enc.map.mixer", cfg_.limits.polyline_points, cfg_.mixer_token_hidden, d, d, rng);
    type_emb_ = &ps_.create("enc.type_embedding", 4, d);
    nn::init_normal(*type_emb_, rng, 0.02);
    for (std::size_t l = 0; l < cfg_.enc_layers; ++l)
      encoder_.emplace_back(ps_, "enc.layer." + std::to_string(l), d, cfg_.heads, cfg_.ffn_hidden, rng);

    router_ = nn::Mlp(ps_, "router", d, d, kNumScenarioTypes, rng);

    query_base_ = &ps_.create("dec.query_base", cfg_.k_a, d);
    nn::init_normal(*query_base_, rng, 0.02);
    if (cfg_.ssq) query_fope_ = nn::FoPE(ps_, "dec.query_fope", 2, 0, d, rng);
    experts_.resize(cfg_.dec_layers);
    expert_params_.resize(cfg_.experts());
    for (std::size_t l = 0; l < cfg_.dec_layers; ++l) {
      const std::string p = "dec.layer." + std::to_string(l);
      self_.emplace_back(ps_, p + ".self", d, cfg_.heads, rng);
      cross_.emplace_back(ps_, p + ".cross", d, cfg_.heads, rng);
      for (std::size_t e = 0; e < cfg_.experts(); ++e) {
        const std::size_t first = ps_.size();
        experts_[l].emplace_back(ps_, p + ".expert." + std::to_string(e), d, cfg_.expert_hidden, rng);
        for (std::size_t i = first; i < ps_.size(); ++i) expert_params_[e].push_back(i);
      }
    }
    traj_head_ = nn::Mlp(ps_, "head.traj", d, d, 5 * cfg_.t_f(), rng);
    prob_head_ = nn::Mlp(ps_, "head.prob", d, d, 1, rng);

    for (std::size_t l = 0; l < cfg_.pred_layers; ++l)
      pred_dec_.emplace_back(ps_, "pred.layer." + std::to_string(l), d, cfg_.heads, cfg_.ffn_hidden, rng);
    pred_head_ = nn::Mlp(ps_, "pred.head", d, d, 2 * cfg_.t_f(), rng);
  }

  EMoEPlanner(const EMoEPlanner&) = delete;
  EMoEPlanner& operator=(const EMoEPlanner&) = delete;

  const NetConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return ps_; }
  const nn::ParamStore& params() const { return ps_; }

  /// Parameter indices of expert e across all decoder layers.
  const std::vector<std::size_t>& expert_params(std::size_t e) const { return expert_params_.at(e); }

  std::size_t expert_scalar_count() const {
    std::size_t n = 0;
    for (const auto& idx : expert_params_)
      for (std::size_t i : idx) n += ps_[i].value.size();
    return n;
  }

  /// Scene encoder: ego, agent, static and map tokens through L_e blocks.
  nn::Var encode(nn::Graph& g, const Scene& s, bool training, Rng& rng, std::vector<char>& valid) const {
    features::check_caps(s, cfg_.limits);
    const auto& lim = cfg_.limits;
    const std::size_t d = cfg_.d;
    std::vector<nn::Var> parts;
    std::vector<std::size_t> type_idx;
    valid.clear();

    parts.push_back(ego_enc_(g, features::ego(s), training, cfg_.drop_prob, rng));
    type_idx.push_back(0);
    valid.push_back(1);

    auto pad = [&](std::size_t n, std::size_t cap, std::size_t type) {
      if (cap > n) parts.push_back(g.constant(nn::Mat(cap - n, d)));
      for (std::size_t i = 0; i < cap; ++i) {
        type_idx.push_back(type);
        valid.push_back(i < n ? 1 : 0);
      }
    };

    const std::size_t na = s.agents.size();
    if (na > 0) parts.push_back(agent_mixer_(agent_fope_(g, features::agent_steps(s, cfg_.t_h())), na));
    pad(na, lim.max_agents, 1);

    const std::size_t ns = s.statics.size();
    if (ns > 0) parts.push_back(static_enc_(g.constant(features::statics(s))));
    pad(ns, lim.max_statics, 2);

    const std::size_t nm = s.map.size();
    if (nm > 0) parts.push_back(map_mixer_(map_proj_(g.constant(features::map_points(s, lim.polyline_points))), nm));
    pad(nm, lim.max_polylines, 3);

    nn::Var x = concat_rows(parts);
    x = add(x, gather_rows(g.param(*type_emb_), type_idx));
    x = mask_rows(x, valid);
    for (const auto& blk : encoder_) x = mask_rows(blk(x, x, valid), valid);
    return x;
  }

  nn::Var route(nn::Var tokens, const std::vector<char>& valid) const {
    return router_(masked_mean_rows(tokens, valid));
  }

  /// Mode queries: learnable base plus the Fourier embedding of the routed
  /// scenario's anchors.
  nn::Var make_queries(nn::Graph& g, std::span<const Vec2> anchors) const {
    if (anchors.size() != cfg_.k_a) throw InvalidArgument("anchor slice size does not match K_a");
    nn::Var q = g.param(*query_base_);
    if (!cfg_.ssq) return q;
    nn::Mat a(cfg_.k_a, 2);
    for (std::size_t k = 0; k < cfg_.k_a; ++k) {
      a(k, 0) = anchors[k].x;
      a(k, 1) = anchors[k].y;
    }
    return add(q, query_fope_(g, a));
  }

  nn::Var decode(nn::Var queries, nn::Var tokens, const std::vector<char>& valid, std::size_t expert) const {
    nn::Var x = queries;
    for (std::size_t l = 0; l < cfg_.dec_layers; ++l) {
      x = self_[l](x, x, {});
      x = cross_[l](x, tokens, valid);
      x = experts_[l][expert](x);
    }
    return x;
  }

  ForwardResult forward(nn::Graph& g, const Scene& s, const AnchorBank& bank, const ForwardOptions& opt = {}) const {
    if (bank.k != cfg_.k_a) throw InvalidArgument("anchor bank K does not match K_a");
    ForwardResult r;
    Rng rng(opt.dropout_seed);
    r.tokens = encode(g, s, opt.training, rng, r.token_valid);
    r.router_logits = route(r.tokens, r.token_valid);
    if (opt.force_route) {
      r.chosen = *opt.force_route;
    } else {
      r.chosen = scenario_from_index(
          static_cast<int>(argmax_lowest(g.value(r.router_logits).d.data(), kNumScenarioTypes)));
    }
    r.expert = cfg_.emoe ? static_cast<std::size_t>(index_of(r.chosen)) : 0;
    r.queries = make_queries(g, bank.slice(r.chosen));
    r.mode_features = decode(r.queries, r.tokens, r.token_valid, r.expert);
    r.ego_modes = trajectory_decode(traj_head_(r.mode_features), cfg_.pos_scale, cfg_.speed_scale);
    r.mode_logits = prob_head_(r.mode_features);
    r.pred_mode = opt.pred_mode ? *opt.pred_mode : argmax_lowest(g.value(r.mode_logits).d.data(), cfg_.k_a);
    if (r.pred_mode >= cfg_.k_a) throw InvalidArgument("pred_mode out of range");

    r.n_agents = s.agents.size();
    if (r.n_agents > 0) {
      nn::Var q = slice_rows(r.tokens, 1, r.n_agents);
      nn::Var kv = r.tokens;
      std::vector<char> kv_valid = r.token_valid;
      if (cfg_.ego_pred_attention) {
        kv = nn::concat_rows({r.tokens, slice_rows(r.mode_features, r.pred_mode, 1)});
        kv_valid.push_back(1);
      }
      for (const auto& blk : pred_dec_) q = blk(q, kv, kv_valid);
      nn::Mat offset(r.n_agents, 2 * cfg_.t_f());
      for (std::size_t a = 0; a < r.n_agents; ++a) {
        const auto& h = s.agents[a].history.points;
        const double x0 = h.empty() ? 0.0 : h.back().x, y0 = h.empty() ? 0.0 : h.back().y;
        for (std::size_t t = 0; t < cfg_.t_f(); ++t) {
          offset(a, 2 * t) = x0;
          offset(a, 2 * t + 1) = y0;
        }
      }
      r.agent_preds = affine_const(pred_head_(q), cfg_.pos_scale, offset);
    }
    return r;
  }

  PlannerOutput to_output(const nn::Graph& g, const ForwardResult& r, double dt) const {
    PlannerOutput out;
    const nn::Mat& modes = g.value(r.ego_modes);
    for (std::size_t k = 0; k < modes.rows; ++k) out.ego_modes.push_back(row_to_traj(modes, k, dt));
    const nn::Mat& lg = g.value(r.mode_logits);
    out.mode_probs = softmax(lg.d);
    const nn::Mat& rl = g.value(r.router_logits);
    std::copy(rl.d.begin(), rl.d.end(), out.router.logits.begin());
    out.router.chosen = r.chosen;
    out.agent_valid.assign(cfg_.limits.max_agents, 0);
    if (r.agent_preds) {
      const nn::Mat& p = g.value(*r.agent_preds);
      for (std::size_t a = 0; a < p.rows; ++a) {
        std::vector<Vec2> v(cfg_.t_f());
        for (std::size_t t = 0; t < v.size(); ++t) v[t] = {p(a, 2 * t), p(a, 2 * t + 1)};
        out.agent_preds.push_back(std::move(v));
        out.agent_valid[a] = 1;
      }
    }
    return out;
  }

  /// Inference forward with predicted routing.
  PlannerOutput infer(const Scene& s, const AnchorBank& bank) const {
    nn::Graph g;
    const auto r = forward(g, s, bank);
    return to_output(g, r, s.dt);
  }

  /// Highest-probability mode; ties go to the lowest index.
  Trajectory plan(const Scene& s, const AnchorBank& bank) const {
    const auto out = infer(s, bank);
    return out.ego_modes[argmax_lowest(out.mode_probs.data(), out.mode_probs.size())];
  }

  static Trajectory row_to_traj(const nn::Mat& m, std::size_t row, double dt) {
    Trajectory t;
    t.dt = dt;
    const std::size_t steps = m.cols / 4;
    t.points.resize(steps);
    for (std::size_t i = 0; i < steps; ++i) {
      const double* p = m.row(row) + 4 * i;
      t.points[i] = {p[0], p[1], wrap_angle(p[2]), p[3]};
    }
    return t;
  }

  static std::vector<double> softmax(const std::vector<double>& z) {
    double mx = z.empty() ? 0.0 : z[0];
    for (double v : z) mx = std::max(mx, v);
    std::vector<double> p(z.size());
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += p[i] = std::exp(z[i] - mx);
    for (double& v : p) v /= s;
    return p;
  }

 private:
  NetConfig cfg_;
  nn::ParamStore ps_;
  nn::StateDropoutEncoder ego_enc_;
  nn::FoPE agent_fope_;
  nn::Mixer agent_mixer_;
  nn::Mlp static_enc_;
  nn::Linear map_proj_;
  nn::Mixer map_mixer_;
  nn::Parameter* type_emb_ = nullptr;
  std::vector<nn::AttentionBlock> encoder_;
  nn::Mlp router_;
  nn::Parameter* query_base_ = nullptr;
  nn::FoPE query_fope_;
  std::vector<nn::AttentionSublayer> self_, cross_;
  std::vector<std::vector<nn::FeedForwardSublayer>> experts_;
  std::vector<std::vector<std::size_t>> expert_params_;
  nn::Mlp traj_head_, prob_head_;
  std::vector<nn::AttentionBlock> pred_dec_;
  nn::Mlp pred_head_;
};

}  // namespace emoe
