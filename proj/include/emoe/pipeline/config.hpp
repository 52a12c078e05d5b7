#pragma once

#include <charconv>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "emoe/generator.hpp"
#include "emoe/io_util.hpp"
#include "emoe/labeler.hpp"
#include "emoe/planner/net_config.hpp"
#include "emoe/sim/metrics.hpp"
#include "emoe/sim/simulator.hpp"
#include "emoe/training/trainer.hpp"

namespace emoe {

/// Bad config file or value; the CLI maps it to a usage error.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

struct PathsConfig {
  std::filesystem::path dataset = "run/scenes.jsonl";
  std::filesystem::path labeled = "run/labeled.jsonl";
  std::filesystem::path bank = "run/anchors.json";
  std::filesystem::path bank_svg = "run/anchors.svg";
  std::filesystem::path checkpoint = "run/model.ckpt";
  std::filesystem::path metrics = "run/metrics.csv";
  std::filesystem::path simlog = "run/simlog.json";
  std::filesystem::path report = "run/report";      // .csv / .svg appended
  std::filesystem::path ablation = "run/ablation";  // directory of variant artifacts
  std::filesystem::path gradcheck = "run/gradcheck.json";
};

struct DataConfig {
  std::uint64_t seed = 1;
  std::size_t per_type = 100;
  double max_curvature = 0.2;
};

struct AnchorConfig {
  std::size_t k = 24;
  std::uint64_t seed = 1;
};

struct SimSection {
  sim::SimConfig run;
  std::size_t scenes_per_type = 20;
  std::uint64_t seed = 101;  // held-out scenes, independent of the training set
  sim::MetricConfig metrics;
};

struct GradcheckSection {
  NetConfig net;
  double tol = 1e-4;
  double step = 1e-4;
  std::uint64_t seed = 3;

  GradcheckSection() {
    net.d = 8;
    net.heads = 2;
    net.expert_hidden = 16;
    net.ffn_hidden = 16;
    net.enc_layers = 2;
    net.dec_layers = 2;
    net.mixer_token_hidden = 8;
  }
};

struct Config {
  PathsConfig paths;
  DataConfig data;
  LabelRules label;
  AnchorConfig anchors;
  TrainConfig train;
  NetConfig net;
  SimSection sim;
  GradcheckSection gradcheck;

  void validate() const {
    train.validate();
    net.validate();
    gradcheck.net.validate();
    if (anchors.k != net.k_a) throw ConfigError("config: anchors.k must equal net.k_a");
    if (data.per_type == 0) throw ConfigError("config: data.per_type must be positive");
    if (!(sim.run.replan_hz > 0.0)) throw ConfigError("config: sim.replan_hz must be positive");
    if (!(gradcheck.tol > 0.0) || !(gradcheck.step > 0.0)) throw ConfigError("config: gradcheck tolerances must be positive");
  }
};

namespace config_detail {

using Setter = std::function<void(const std::string&)>;

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("config: " + key + ": cannot parse '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("config: " + key + ": expected true or false, got '" + v + "'");
}

class Binder {
 public:
  void bind(const std::string& key, double& x) {
    s_[key] = [&x, key](const std::string& v) { x = parse_number<double>(key, v); };
  }
  void bind(const std::string& key, std::size_t& x) {
    s_[key] = [&x, key](const std::string& v) { x = parse_number<std::size_t>(key, v); };
  }
  void bind_u64(const std::string& key, std::uint64_t& x) {
    s_[key] = [&x, key](const std::string& v) { x = parse_number<std::uint64_t>(key, v); };
  }
  void bind(const std::string& key, bool& x) {
    s_[key] = [&x, key](const std::string& v) { x = parse_bool(key, v); };
  }
  void bind(const std::string& key, std::filesystem::path& x) {
    s_[key] = [&x](const std::string& v) { x = v; };
  }
  const std::map<std::string, Setter>& setters() const { return s_; }

 private:
  std::map<std::string, Setter> s_;
};

inline void bind_net(Binder& b, const std::string& sec, NetConfig& n) {
  b.bind(sec + ".d", n.d);
  b.bind(sec + ".heads", n.heads);
  b.bind(sec + ".expert_hidden", n.expert_hidden);
  b.bind(sec + ".ffn_hidden", n.ffn_hidden);
  b.bind(sec + ".enc_layers", n.enc_layers);
  b.bind(sec + ".dec_layers", n.dec_layers);
  b.bind(sec + ".pred_layers", n.pred_layers);
  b.bind(sec + ".k_a", n.k_a);
  b.bind(sec + ".n_experts", n.n_experts);
  b.bind(sec + ".mixer_token_hidden", n.mixer_token_hidden);
  b.bind(sec + ".drop_prob", n.drop_prob);
  b.bind(sec + ".pos_scale", n.pos_scale);
  b.bind(sec + ".speed_scale", n.speed_scale);
  b.bind(sec + ".max_agents", n.limits.max_agents);
  b.bind(sec + ".max_statics", n.limits.max_statics);
  b.bind(sec + ".max_polylines", n.limits.max_polylines);
  b.bind(sec + ".polyline_points", n.limits.polyline_points);
  b.bind(sec + ".history_steps", n.limits.history_steps);
  b.bind(sec + ".future_steps", n.limits.future_steps);
  b.bind_u64(sec + ".init_seed", n.init_seed);
  b.bind(sec + ".emoe", n.emoe);
  b.bind(sec + ".ssq", n.ssq);
  b.bind(sec + ".ego_pred_attention", n.ego_pred_attention);
}

inline Binder make_binder(Config& c) {
  Binder b;
  auto& p = c.paths;
  b.bind("paths.dataset", p.dataset);
  b.bind("paths.labeled", p.labeled);
  b.bind("paths.bank", p.bank);
  b.bind("paths.bank_svg", p.bank_svg);
  b.bind("paths.checkpoint", p.checkpoint);
  b.bind("paths.metrics", p.metrics);
  b.bind("paths.simlog", p.simlog);
  b.bind("paths.report", p.report);
  b.bind("paths.ablation", p.ablation);
  b.bind("paths.gradcheck", p.gradcheck);

  b.bind_u64("data.seed", c.data.seed);
  b.bind("data.per_type", c.data.per_type);
  b.bind("data.max_curvature", c.data.max_curvature);

  b.bind("label.straight_max_deg", c.label.straight_max_deg);
  b.bind("label.turn_max_deg", c.label.turn_max_deg);

  b.bind("anchors.k", c.anchors.k);
  b.bind_u64("anchors.seed", c.anchors.seed);

  auto& t = c.train;
  b.bind("train.lr", t.lr);
  b.bind("train.batch_size", t.batch_size);
  b.bind("train.epochs", t.epochs);
  b.bind("train.max_steps", t.max_steps);
  b.bind("train.k_r", t.k_r);
  b.bind_u64("train.seed", t.seed);
  b.bind("train.threads", t.threads);
  b.bind("train.per_type_cap", t.per_type_cap);
  b.bind("train.interaction_weights", t.interaction_weights);
  b.bind("train.cosine_decay", t.cosine_decay);
  b.bind("train.w_reg", t.weights.reg);
  b.bind("train.w_cls", t.weights.cls);
  b.bind("train.w_col", t.weights.col);
  b.bind("train.w_pred", t.weights.pred);
  b.bind("train.w_router", t.weights.router);

  bind_net(b, "net", c.net);

  auto& s = c.sim;
  b.bind("sim.horizon", s.run.horizon_s);
  b.bind("sim.replan_hz", s.run.replan_hz);
  b.bind("sim.scenes_per_type", s.scenes_per_type);
  b.bind_u64("sim.seed", s.seed);
  b.bind("sim.lookahead_steps", s.run.controller.lookahead_steps);
  b.bind("sim.max_accel", s.run.controller.max_accel);
  b.bind("sim.max_decel", s.run.controller.max_decel);
  b.bind("sim.max_yaw_rate", s.run.controller.max_yaw_rate);
  b.bind("sim.ttc_bound", s.metrics.ttc_bound);
  b.bind("sim.comfort_lon_accel", s.metrics.comfort.lon_accel);
  b.bind("sim.comfort_lat_accel", s.metrics.comfort.lat_accel);
  b.bind("sim.comfort_jerk", s.metrics.comfort.jerk);
  b.bind("sim.comfort_yaw_rate", s.metrics.comfort.yaw_rate);
  b.bind("sim.comfort_yaw_accel", s.metrics.comfort.yaw_accel);

  bind_net(b, "gradcheck", c.gradcheck.net);
  b.bind("gradcheck.tol", c.gradcheck.tol);
  b.bind("gradcheck.step", c.gradcheck.step);
  b.bind_u64("gradcheck.seed", c.gradcheck.seed);
  return b;
}

}  // namespace config_detail

/// Parses `[section]` / `key = value` text over the defaults. Relative paths
/// are taken relative to `base_dir`. Unknown keys are an error that names
/// every one of them.
inline Config parse_config(std::istream& in, const std::filesystem::path& base_dir = {}) {
  Config c;
  auto binder = config_detail::make_binder(c);
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  std::vector<std::string> unknown;
  for (const auto& it : items) {
    if (it.name == "++" || it.name == "--") continue;
    const std::string key = it.fullname();
    auto s = binder.setters().find(key);
    if (s == binder.setters().end()) {
      unknown.push_back(key);
      continue;
    }
    if (it.inputs.size() != 1) throw ConfigError("config: " + key + " expects a single value");
    s->second(it.inputs.front());
  }
  if (!unknown.empty()) {
    std::string msg = "config: unknown keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }
  if (!base_dir.empty()) {
    for (auto* p : {&c.paths.dataset, &c.paths.labeled, &c.paths.bank, &c.paths.bank_svg, &c.paths.checkpoint,
                    &c.paths.metrics, &c.paths.simlog, &c.paths.report, &c.paths.ablation, &c.paths.gradcheck})
      if (p->is_relative()) *p = base_dir / *p;
  }
  c.label.horizon_steps = c.net.t_f();
  c.validate();
  return c;
}

inline Config load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  std::istringstream in(read_file(path));
  return parse_config(in, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

}  // namespace emoe
