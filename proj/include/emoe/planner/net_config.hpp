#pragma once

#include <cstdint>

#include <json.hpp>

#include "emoe/common.hpp"
#include "emoe/scenario.hpp"

namespace emoe {

/// Widths, depths and caps of the planner network.
struct NetConfig {
  std::size_t d = 128;            // feature width D
  std::size_t heads = 8;
  std::size_t expert_hidden = 512;  // D_h
  std::size_t ffn_hidden = 256;   // encoder and prediction-decoder blocks
  std::size_t enc_layers = 4;     // L_e
  std::size_t dec_layers = 4;     // L_d
  std::size_t pred_layers = 1;
  std::size_t k_a = 24;           // anchors / modes per scenario
  std::size_t n_experts = kNumScenarioTypes;  // N_E
  std::size_t mixer_token_hidden = 32;
  double drop_prob = 0.5;         // state dropout of the ego encoder
  double pos_scale = 10.0;        // metres per unit of raw position output
  double speed_scale = 5.0;       // m/s per unit of softplus speed output
  SceneLimits limits;             // includes T_h, T_f, L_p and entity caps
  std::uint64_t init_seed = 1;

  // Ablation switches; all true is the full model.
  bool emoe = true;                // false: one shared expert
  bool ssq = true;                 // false: queries without anchor embedding
  bool ego_pred_attention = true;  // false: prediction decoder ignores ego modes

  std::size_t t_f() const { return limits.future_steps; }
  std::size_t t_h() const { return limits.history_steps; }
  std::size_t experts() const { return emoe ? n_experts : 1; }
  std::size_t tokens() const { return 1 + limits.max_agents + limits.max_statics + limits.max_polylines; }

  void validate() const {
    if (d == 0 || heads == 0 || d % heads != 0) throw InvalidArgument("net: d must be a positive multiple of heads");
    if (n_experts != kNumScenarioTypes) throw InvalidArgument("net: n_experts must equal the number of scenario types");
    if (k_a == 0 || enc_layers == 0 || dec_layers == 0 || expert_hidden == 0 || ffn_hidden == 0)
      throw InvalidArgument("net: sizes must be positive");
    if (drop_prob < 0.0 || drop_prob >= 1.0) throw InvalidArgument("net: drop_prob must be in [0, 1)");
    if (limits.future_steps == 0 || limits.history_steps == 0 || limits.polyline_points < 2)
      throw InvalidArgument("net: horizons must be positive");
  }
};

inline nlohmann::json to_json(const NetConfig& c) {
  return {{"d", c.d},
          {"heads", c.heads},
          {"expert_hidden", c.expert_hidden},
          {"ffn_hidden", c.ffn_hidden},
          {"enc_layers", c.enc_layers},
          {"dec_layers", c.dec_layers},
          {"pred_layers", c.pred_layers},
          {"k_a", c.k_a},
          {"n_experts", c.n_experts},
          {"mixer_token_hidden", c.mixer_token_hidden},
          {"drop_prob", c.drop_prob},
          {"pos_scale", c.pos_scale},
          {"speed_scale", c.speed_scale},
          {"max_agents", c.limits.max_agents},
          {"max_statics", c.limits.max_statics},
          {"max_polylines", c.limits.max_polylines},
          {"polyline_points", c.limits.polyline_points},
          {"history_steps", c.limits.history_steps},
          {"future_steps", c.limits.future_steps},
          {"init_seed", c.init_seed},
          {"emoe", c.emoe},
          {"ssq", c.ssq},
          {"ego_pred_attention", c.ego_pred_attention}};
}

inline NetConfig net_config_from_json(const nlohmann::json& j) {
  NetConfig c;
  c.d = j.at("d");
  c.heads = j.at("heads");
  c.expert_hidden = j.at("expert_hidden");
  c.ffn_hidden = j.at("ffn_hidden");
  c.enc_layers = j.at("enc_layers");
  c.dec_layers = j.at("dec_layers");
  c.pred_layers = j.at("pred_layers");
  c.k_a = j.at("k_a");
  c.n_experts = j.at("n_experts");
  c.mixer_token_hidden = j.at("mixer_token_hidden");
  c.drop_prob = j.at("drop_prob");
  c.pos_scale = j.at("pos_scale");
  c.speed_scale = j.at("speed_scale");
  c.limits.max_agents = j.at("max_agents");
  c.limits.max_statics = j.at("max_statics");
  c.limits.max_polylines = j.at("max_polylines");
  c.limits.polyline_points = j.at("polyline_points");
  c.limits.history_steps = j.at("history_steps");
  c.limits.future_steps = j.at("future_steps");
  c.init_seed = j.at("init_seed");
  c.emoe = j.at("emoe");
  c.ssq = j.at("ssq");
  c.ego_pred_attention = j.at("ego_pred_attention");
  return c;
}

}  // namespace emoe
