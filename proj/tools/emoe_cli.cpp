// emoe: scenario generation, anchors, training, closed-loop evaluation.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "emoe/pipeline/commands.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

int fail(int code, const std::string& kind, const std::string& msg) {
  std::cerr << nlohmann::json{{"error", kind}, {"exit", code}, {"message", msg}}.dump() << "\n";
  std::cerr << "emoe: " << msg << "\n";
  return code;
}

struct Common {
  std::string config;
  std::size_t threads = 0;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "Config file (default: $EMOE_CONFIG, else built-in defaults)")
      ->envname("EMOE_CONFIG");
  sub->add_option("--threads", c.threads, "Worker threads for training and simulation")->check(CLI::PositiveNumber);
}

emoe::Config resolve(const Common& c) {
  emoe::Config cfg = c.config.empty() ? emoe::Config{} : emoe::load_config(c.config);
  if (c.threads > 0) cfg.train.threads = c.threads;
  cfg.label.horizon_steps = cfg.net.t_f();
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scenario-routed trajectory planner: data, training and closed-loop evaluation"};
  app.require_subcommand(1);
  Common common;

  auto* gen = app.add_subcommand("generate", "Generate synthetic scenes (JSON lines)");
  std::optional<std::uint64_t> gen_seed;
  std::optional<std::size_t> gen_n;
  std::string gen_out;
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--per-type", gen_n, "Scenes per scenario type")->check(CLI::PositiveNumber);
  gen->add_option("--out", gen_out, "Output file (default: paths.dataset)");

  auto* lab = app.add_subcommand("label", "Assign scenario labels by rule");
  std::string lab_in, lab_out;
  lab->add_option("--in", lab_in, "Input scenes (default: paths.dataset)");
  lab->add_option("--out", lab_out, "Output scenes (default: paths.labeled)");

  auto* anc = app.add_subcommand("anchors", "Cluster endpoints into the anchor bank");
  std::optional<std::size_t> anc_k;
  std::optional<std::uint64_t> anc_seed;
  anc->add_option("--k", anc_k, "Anchors per scenario type")->check(CLI::PositiveNumber);
  anc->add_option("--seed", anc_seed, "Clustering seed");

  auto* trn = app.add_subcommand("train", "Train the planner");

  auto* abl = app.add_subcommand("ablate", "Train and evaluate switched-off variants against the full model");
  std::vector<std::string> switches;
  abl->add_option("--switch", switches, "Variant to run, repeatable (default: all)")
      ->check(CLI::IsMember({"emoe", "ssq", "iloss"}));

  auto* gc = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  std::optional<double> gc_tol;
  gc->add_option("--tol", gc_tol, "Maximum relative error")->check(CLI::PositiveNumber);

  auto* simc = app.add_subcommand("simulate", "Closed-loop simulation of the trained planner");
  std::optional<double> sim_h, sim_hz;
  std::optional<std::size_t> sim_n;
  simc->add_option("--horizon", sim_h, "Seconds per run")->check(CLI::PositiveNumber);
  simc->add_option("--replan-hz", sim_hz, "Replanning rate")->check(CLI::PositiveNumber);
  simc->add_option("--scenes-per-type", sim_n, "Held-out scenes per scenario type");

  auto* rep = app.add_subcommand("report", "Per-scenario score table from the simulation log");
  std::string rep_fmt = "csv";
  rep->add_option("--format", rep_fmt, "Output format")->check(CLI::IsMember({"csv", "svg"}));

  for (auto* s : {gen, lab, anc, trn, abl, gc, simc, rep}) add_common(s, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kExitUsage, "usage", e.what());
  }

  try {
    emoe::Config cfg = resolve(common);
    std::string summary;
    if (gen->parsed()) {
      if (gen_seed) cfg.data.seed = *gen_seed;
      if (gen_n) cfg.data.per_type = *gen_n;
      if (!gen_out.empty()) cfg.paths.dataset = gen_out;
      summary = emoe::cmd_generate(cfg);
    } else if (lab->parsed()) {
      summary = emoe::cmd_label(cfg, lab_in.empty() ? cfg.paths.dataset : std::filesystem::path(lab_in),
                                lab_out.empty() ? cfg.paths.labeled : std::filesystem::path(lab_out));
    } else if (anc->parsed()) {
      if (anc_k) cfg.anchors.k = cfg.net.k_a = *anc_k;
      if (anc_seed) cfg.anchors.seed = *anc_seed;
      summary = emoe::cmd_anchors(cfg);
    } else if (trn->parsed()) {
      summary = emoe::cmd_train(cfg);
    } else if (abl->parsed()) {
      summary = emoe::cmd_ablate(cfg, switches.empty() ? std::vector<std::string>{"emoe", "ssq", "iloss"} : switches);
    } else if (gc->parsed()) {
      if (gc_tol) cfg.gradcheck.tol = *gc_tol;
      std::string scene;
      const auto r = emoe::run_gradcheck(cfg, &scene);
      emoe::write_file_atomic(cfg.paths.gradcheck,
                              emoe::gradcheck_json(r, cfg.gradcheck.step, scene).dump(1) + "\n");
      summary = std::string("gradcheck ") + (r.passed() ? "passed" : "FAILED") + ": " +
                std::to_string(r.checked) + " entries over " + std::to_string(r.params.size()) +
                " parameters, max relative error " + std::to_string(r.max_rel_error()) + " (tol " +
                std::to_string(r.tolerance) + ") -> " + cfg.paths.gradcheck.string();
      if (!r.passed()) return fail(kExitRuntime, "gradcheck", summary);
    } else if (simc->parsed()) {
      if (sim_h) cfg.sim.run.horizon_s = *sim_h;
      if (sim_hz) cfg.sim.run.replan_hz = *sim_hz;
      if (sim_n) cfg.sim.scenes_per_type = *sim_n;
      summary = emoe::cmd_simulate(cfg);
    } else if (rep->parsed()) {
      summary = emoe::cmd_report(cfg, rep_fmt);
    }
    std::cout << summary << "\n";
    return kExitOk;
  } catch (const emoe::MissingArtifact& e) {
    return fail(kExitUsage, "missing_prerequisite", e.what());
  } catch (const emoe::ConfigError& e) {
    return fail(kExitUsage, "config", e.what());
  } catch (const emoe::TrainingAborted& e) {
    return fail(kExitRuntime, "training_aborted",
                std::string(e.what()) + "; last good parameters in " + e.checkpoint.string());
  } catch (const std::exception& e) {
    return fail(kExitRuntime, "runtime", e.what());
  }
}
