#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "emoe/anchor_bank.hpp"
#include "emoe/generator.hpp"
#include "emoe/labeler.hpp"
#include "emoe/nn/gradcheck.hpp"
#include "emoe/pipeline/config.hpp"
#include "emoe/scene_io.hpp"
#include "emoe/sim/metrics.hpp"
#include "emoe/sim/simulator.hpp"
#include "emoe/training/trainer.hpp"

namespace emoe {

/// A required input artifact does not exist.
class MissingArtifact : public std::runtime_error {
 public:
  MissingArtifact(const std::string& what, const std::filesystem::path& p)
      : std::runtime_error(what + " not found: " + p.string()) {}
};

inline void require_file(const std::filesystem::path& p, const std::string& what) {
  if (!std::filesystem::exists(p)) throw MissingArtifact(what, p);
}

// ---------------------------------------------------------------- data

inline std::vector<Scene> generate_dataset(const Config& c, std::uint64_t seed, std::size_t per_type) {
  GeneratorConfig g;
  g.limits = c.net.limits;
  g.max_curvature = c.data.max_curvature;
  std::vector<Scene> out;
  for (ScenarioType t : kAllScenarioTypes) {
    auto v = generate_synthetic(seed, t, per_type, g);
    out.insert(out.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  }
  return out;
}

inline std::array<std::size_t, kNumScenarioTypes> label_histogram(const std::vector<Scene>& scenes) {
  std::array<std::size_t, kNumScenarioTypes> h{};
  for (const auto& s : scenes)
    if (s.label) ++h[static_cast<std::size_t>(index_of(*s.label))];
  return h;
}

inline std::string histogram_text(const std::array<std::size_t, kNumScenarioTypes>& h) {
  std::string out;
  for (ScenarioType t : kAllScenarioTypes) {
    if (!out.empty()) out += ' ';
    out += std::string(to_string(t)) + "=" + std::to_string(h[static_cast<std::size_t>(index_of(t))]);
  }
  return out;
}

inline std::string cmd_generate(const Config& c) {
  const auto scenes = generate_dataset(c, c.data.seed, c.data.per_type);
  write_scenes(scenes, c.paths.dataset);
  return "generated " + std::to_string(scenes.size()) + " scenes -> " + c.paths.dataset.string();
}

inline std::string cmd_label(const Config& c, const std::filesystem::path& in, const std::filesystem::path& out) {
  require_file(in, "dataset");
  auto scenes = read_scenes(in);
  for (auto& s : scenes) s.label = label_scenario(s, c.label);
  write_scenes(scenes, out);
  return "labeled " + std::to_string(scenes.size()) + " scenes -> " + out.string() + " (" +
         histogram_text(label_histogram(scenes)) + ")";
}

inline std::string cmd_anchors(const Config& c) {
  require_file(c.paths.labeled, "labeled dataset");
  const auto scenes = read_scenes(c.paths.labeled);
  const auto bank = build_bank(scenes, c.anchors.k, c.anchors.seed, c.net.t_f());
  write_bank(bank, c.paths.bank);
  write_file_atomic(c.paths.bank_svg, bank_to_svg(bank, scenes, c.net.t_f()));
  return "anchor bank k=" + std::to_string(bank.k) + " -> " + c.paths.bank.string();
}

// ---------------------------------------------------------------- train

struct TrainOutcome {
  std::size_t steps = 0;
  std::size_t scenes = 0;
  LossReport initial;
  LossReport final;
};

inline AnchorBank load_bank_for(const Config& c) {
  require_file(c.paths.bank, "anchor bank");
  auto bank = read_bank(c.paths.bank);
  if (bank.k != c.net.k_a)
    throw ConfigError("anchor bank has k=" + std::to_string(bank.k) + " but net.k_a=" + std::to_string(c.net.k_a));
  return bank;
}

inline TrainOutcome train_model(const Config& c, const NetConfig& nc, const TrainConfig& tc,
                                const std::filesystem::path& ckpt, const std::filesystem::path& metrics) {
  const auto bank = load_bank_for(c);
  require_file(c.paths.labeled, "labeled dataset");
  auto scenes = cap_per_type(read_scenes(c.paths.labeled), tc.per_type_cap);
  for (const auto& s : scenes)
    if (!s.label) throw InvalidArgument("train: dataset contains an unlabeled scene");

  EMoEPlanner net(nc);
  Trainer tr(net, bank, std::move(scenes), tc);
  auto abort_path = ckpt;
  abort_path += ".abort";
  tr.set_abort_checkpoint(abort_path);
  TrainOutcome out;
  out.scenes = tr.scenes().size();
  out.initial = tr.evaluate();
  std::string log = metrics_csv_header();
  tr.run([&](const StepStats& s) { log += metrics_csv_row(s); });
  out.steps = tr.steps_taken();
  out.final = tr.evaluate();
  nn::save_checkpoint(net.params(), to_json(nc).dump(), ckpt);
  write_file_atomic(metrics, log);
  return out;
}

inline std::string cmd_train(const Config& c) {
  const auto r = train_model(c, c.net, c.train, c.paths.checkpoint, c.paths.metrics);
  return "trained " + std::to_string(r.steps) + " steps on " + std::to_string(r.scenes) + " scenes, loss " +
         sim::fixed(r.initial.total) + " -> " + sim::fixed(r.final.total) + ", checkpoint " +
         c.paths.checkpoint.string();
}

inline std::unique_ptr<EMoEPlanner> load_planner(const std::filesystem::path& ckpt) {
  require_file(ckpt, "checkpoint");
  NetConfig nc;
  try {
    nc = net_config_from_json(nlohmann::json::parse(nn::checkpoint_metadata(ckpt)));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("checkpoint: bad metadata: " + std::string(e.what()));
  }
  auto net = std::make_unique<EMoEPlanner>(nc);
  nn::load_checkpoint(net->params(), ckpt);
  return net;
}

// ---------------------------------------------------------------- gradcheck

inline nlohmann::json gradcheck_json(const nn::GradCheckReport& r, double step, const std::string& scene) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : r.params)
    params.push_back({{"name", p.name},
                      {"max_rel_error", p.max_rel_error},
                      {"analytic", p.analytic},
                      {"numeric", p.numeric},
                      {"finite", p.finite}});
  return {{"tolerance", r.tolerance}, {"step", step},       {"scene", scene},  {"checked", r.checked},
          {"max_rel_error", r.max_rel_error()}, {"passed", r.passed()}, {"params", params}};
}

/// Every parameter of a small network with all modules, against the full
/// training loss. The sample is chosen away from L1 and hinge kinks.
inline nn::GradCheckReport run_gradcheck(const Config& c, std::string* scene_name = nullptr) {
  const NetConfig& nc = c.gradcheck.net;
  GeneratorConfig g;
  g.limits = nc.limits;
  std::vector<Scene> scenes;
  for (ScenarioType t : kAllScenarioTypes) {
    auto v = generate_synthetic(c.gradcheck.seed, t, std::max<std::size_t>(nc.k_a + 6, 30), g);
    scenes.insert(scenes.end(), v.begin(), v.end());
  }
  const auto bank = build_bank(scenes, nc.k_a, c.gradcheck.seed, nc.t_f());
  EMoEPlanner net(nc);

  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Scene& s = scenes[i];
    if (s.agents.empty()) continue;
    const auto tg = make_targets(s, bank, nc.t_f(), c.train.k_r, c.train.interaction_weights);
    const ForwardOptions fo{true, tg.label, tg.target_mode, derive_seed(c.gradcheck.seed, i)};
    nn::Graph probe;
    const auto rep = total_loss(probe, net.forward(probe, s, bank, fo), tg, c.train.weights, false);
    if (!(rep.kink_margin > 10.0 * c.gradcheck.step)) continue;

    auto loss = [&] {
      nn::Graph gr;
      return total_loss(gr, net.forward(gr, s, bank, fo), tg, c.train.weights, false).total;
    };
    auto analytic = [&](nn::GradBuffer& gb) {
      nn::Graph gr;
      total_loss(gr, net.forward(gr, s, bank, fo), tg, c.train.weights);
      gr.backward();
      gr.accumulate(gb);
    };
    nn::GradCheckOptions opt;
    opt.step = c.gradcheck.step;
    opt.tolerance = c.gradcheck.tol;
    if (scene_name) *scene_name = std::string(to_string(tg.label)) + "#" + std::to_string(i);
    return nn::grad_check(net.params(), loss, analytic, opt);
  }
  throw std::runtime_error("gradcheck: no generated scene is clear of loss kinks");
}

// ---------------------------------------------------------------- simulate

struct SimRun {
  Scene world;
  sim::SimLog log;
  sim::MetricReport metrics;
};

inline nlohmann::json metrics_json(const sim::MetricReport& m) {
  return {{"collisions", m.collisions}, {"drivable", m.drivable}, {"ttc", m.ttc},          {"progress", m.progress},
          {"speed", m.speed},           {"comfort", m.comfort},   {"composite", m.composite()}};
}

inline sim::MetricReport metrics_from_json(const nlohmann::json& j) {
  sim::MetricReport m;
  m.collisions = j.at("collisions");
  m.drivable = j.at("drivable");
  m.ttc = j.at("ttc");
  m.progress = j.at("progress");
  m.speed = j.at("speed");
  m.comfort = j.at("comfort");
  return m;
}

inline std::string sim_scene_id(ScenarioType t, std::size_t i) {
  std::string n = std::to_string(i);
  return std::string(to_string(t)) + "-" + std::string(n.size() < 3 ? 3 - n.size() : 0, '0') + n;
}

/// Held-out scenes, labeled by the rules, sorted by id.
inline std::vector<std::pair<std::string, Scene>> sim_scenes(const Config& c) {
  GeneratorConfig g;
  g.limits = c.net.limits;
  g.max_curvature = c.data.max_curvature;
  std::vector<std::pair<std::string, Scene>> out;
  if (c.sim.scenes_per_type == 0) return out;
  for (ScenarioType t : kAllScenarioTypes) {
    auto v = generate_synthetic(c.sim.seed, t, c.sim.scenes_per_type, g);
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i].label = label_scenario(v[i], c.label);
      out.emplace_back(sim_scene_id(t, i), std::move(v[i]));
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

/// One simulation per scene, spread over `threads` workers; results keep
/// scene order.
inline std::vector<SimRun> simulate_planner(const Config& c, const std::vector<std::pair<std::string, Scene>>& scenes,
                                            const std::function<sim::Planner(const Scene&)>& make_planner) {
  std::vector<SimRun> runs(scenes.size());
  std::vector<std::exception_ptr> errors(scenes.size());
  auto work = [&](std::size_t w, std::size_t stride) {
    for (std::size_t i = w; i < scenes.size(); i += stride) {
      try {
        const Scene& world = scenes[i].second;
        runs[i].world = world;
        runs[i].log = sim::run_closed_loop(world, make_planner(world), c.sim.run, scenes[i].first);
        runs[i].metrics = sim::evaluate_log(runs[i].log, world, c.sim.metrics);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min<std::size_t>(std::max<std::size_t>(c.train.threads, 1), scenes.size());
  if (workers <= 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return runs;
}

inline std::vector<SimRun> simulate_checkpoint(const Config& c, const std::filesystem::path& ckpt) {
  const auto bank = load_bank_for(c);
  const auto owned = load_planner(ckpt);
  const EMoEPlanner& net = *owned;
  if (net.config().k_a != bank.k) throw ConfigError("checkpoint and anchor bank disagree on k_a");
  return simulate_planner(c, sim_scenes(c), [&](const Scene&) -> sim::Planner {
    return [&](const Scene& local, std::size_t, const Pose2&) { return net.plan(local, bank); };
  });
}

inline nlohmann::json simlog_json(const Config& c, const std::vector<SimRun>& runs, const std::string& planner) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : runs) {
    auto j = sim::sim_log_to_json(r.log);
    j["metrics"] = metrics_json(r.metrics);
    arr.push_back(std::move(j));
  }
  return {{"version", 1},
          {"planner", planner},
          {"horizon_s", c.sim.run.horizon_s},
          {"replan_hz", c.sim.run.replan_hz},
          {"runs", arr}};
}

inline std::vector<std::pair<ScenarioType, sim::MetricReport>> scored_runs(const std::vector<SimRun>& runs) {
  std::vector<std::pair<ScenarioType, sim::MetricReport>> out;
  for (const auto& r : runs) out.emplace_back(r.log.type, r.metrics);
  return out;
}

inline std::string cmd_simulate(const Config& c) {
  const auto runs = simulate_checkpoint(c, c.paths.checkpoint);
  write_file_atomic(c.paths.simlog, simlog_json(c, runs, c.paths.checkpoint.filename().string()).dump() + "\n");
  return "simulated " + std::to_string(runs.size()) + " scenes, composite " +
         sim::fixed(sim::overall_composite(scored_runs(runs))) + " -> " + c.paths.simlog.string();
}

// ---------------------------------------------------------------- report

inline std::vector<std::pair<ScenarioType, sim::MetricReport>> read_simlog_metrics(const std::filesystem::path& p) {
  require_file(p, "simulation log");
  std::vector<std::pair<ScenarioType, sim::MetricReport>> out;
  try {
    const auto j = nlohmann::json::parse(read_file(p));
    for (const auto& r : j.at("runs")) {
      const auto t = scenario_from_string(r.at("scenario_type").get<std::string>());
      if (!t) throw InvalidArgument("simulation log: unknown scenario type");
      out.emplace_back(*t, metrics_from_json(r.at("metrics")));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("simulation log: " + std::string(e.what()));
  }
  return out;
}

inline std::filesystem::path with_ext(std::filesystem::path p, const char* ext) {
  p += ext;
  return p;
}

inline std::string cmd_report(const Config& c, const std::string& format) {
  const auto runs = read_simlog_metrics(c.paths.simlog);
  const auto rows = sim::score_table(runs);
  const auto out = with_ext(c.paths.report, format == "svg" ? ".svg" : ".csv");
  write_file_atomic(out, format == "svg" ? sim::score_table_svg(rows) : sim::score_table_csv(rows));
  return "report of " + std::to_string(runs.size()) + " runs, composite " +
         sim::fixed(sim::overall_composite(runs)) + " -> " + out.string();
}

// ---------------------------------------------------------------- ablate

struct AblationRow {
  std::string variant;
  double final_loss = 0.0;
  std::size_t runs = 0;
  sim::MetricReport mean;  // metric means over runs
  double composite = 0.0;
};

/// Config of a named variant; "full" is the unmodified config.
inline Config ablation_variant(const Config& base, const std::string& name) {
  Config c = base;
  if (name == "emoe") c.net.emoe = false;
  else if (name == "ssq") c.net.ssq = false;
  else if (name == "iloss") {
    c.train.interaction_weights = false;
    c.net.ego_pred_attention = false;
  } else if (name != "full") throw ConfigError("ablate: unknown switch '" + name + "'");
  return c;
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "variant,final_loss,runs,collisions,drivable,ttc,progress,speed,comfort,composite\n";
  for (const auto& r : rows) {
    const auto& m = r.mean;
    out += r.variant + "," + sim::fixed(r.final_loss, 6) + "," + std::to_string(r.runs) + "," +
           sim::fixed(m.collisions) + "," + sim::fixed(m.drivable) + "," + sim::fixed(m.ttc) + "," +
           sim::fixed(m.progress) + "," + sim::fixed(m.speed) + "," + sim::fixed(m.comfort) + "," +
           sim::fixed(r.composite) + "\n";
  }
  return out;
}

inline std::string ablation_svg(const std::vector<AblationRow>& rows) {
  constexpr double kW = 520.0, kRow = 34.0, kLeft = 90.0;
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  const double h = 40.0 + kRow * static_cast<double>(rows.size());
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << h << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"10\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">Composite score by variant</text>\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double y = 32.0 + kRow * static_cast<double>(i);
    const double w = (kW - kLeft - 70.0) * std::clamp(rows[i].composite, 0.0, 1.0);
    os << "<text x=\"10\" y=\"" << y + 17 << "\" font-family=\"sans-serif\" font-size=\"12\">" << rows[i].variant
       << "</text>\n<rect x=\"" << kLeft << "\" y=\"" << y << "\" width=\"" << w << "\" height=\"24\" fill=\""
       << (i == 0 ? "#3b6ea5" : "#a5a5a5") << "\"/>\n<text x=\"" << kLeft + w + 6 << "\" y=\"" << y + 17
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << sim::fixed(rows[i].composite, 3) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

inline AblationRow summarize_variant(const std::string& name, double final_loss, const std::vector<SimRun>& runs) {
  AblationRow row;
  row.variant = name;
  row.final_loss = final_loss;
  row.runs = runs.size();
  sim::MetricReport sum{0, 0, 0, 0, 0, 0};
  for (const auto& r : runs) {
    sum.collisions += r.metrics.collisions;
    sum.drivable += r.metrics.drivable;
    sum.ttc += r.metrics.ttc;
    sum.progress += r.metrics.progress;
    sum.speed += r.metrics.speed;
    sum.comfort += r.metrics.comfort;
  }
  const double n = runs.empty() ? 1.0 : static_cast<double>(runs.size());
  row.mean = {sum.collisions / n, sum.drivable / n, sum.ttc / n, sum.progress / n, sum.speed / n, sum.comfort / n};
  row.composite = sim::overall_composite(scored_runs(runs));
  return row;
}

/// Trains and simulates the full model and each switched-off variant under
/// the same seeds. Artifacts go to paths.ablation/<variant>.*
inline std::vector<AblationRow> run_ablation(const Config& base, const std::vector<std::string>& switches) {
  std::vector<std::string> variants{"full"};
  for (const auto& s : switches)
    if (std::find(variants.begin(), variants.end(), s) == variants.end()) variants.push_back(s);
  for (const auto& v : variants) (void)ablation_variant(base, v);

  std::vector<AblationRow> rows;
  const auto dir = base.paths.ablation;
  for (const auto& v : variants) {
    const Config c = ablation_variant(base, v);
    const auto ckpt = dir / (v + ".ckpt");
    const auto tr = train_model(c, c.net, c.train, ckpt, dir / (v + ".metrics.csv"));
    const auto runs = simulate_checkpoint(c, ckpt);
    write_file_atomic(dir / (v + ".simlog.json"), simlog_json(c, runs, ckpt.filename().string()).dump() + "\n");
    rows.push_back(summarize_variant(v, tr.final.total, runs));
  }
  write_file_atomic(dir / "ablation.csv", ablation_csv(rows));
  write_file_atomic(dir / "ablation.svg", ablation_svg(rows));
  return rows;
}

inline std::string cmd_ablate(const Config& c, const std::vector<std::string>& switches) {
  const auto rows = run_ablation(c, switches);
  std::string out = "ablation -> " + (c.paths.ablation / "ablation.csv").string() + ":";
  for (const auto& r : rows) out += " " + r.variant + "=" + sim::fixed(r.composite);
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].composite > rows[0].composite) out += " (" + rows[i].variant + " scores above full)";
  return out;
}

}  // namespace emoe
