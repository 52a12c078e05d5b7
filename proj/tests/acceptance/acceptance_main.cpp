// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "emoe/pipeline/commands.hpp"

using namespace emoe;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  bool finding = false;  // passed its gate, but the measured property did not hold
};

struct Env {
  fs::path work;
  std::string cli;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

int run_cli(const Env& env, const std::string& args, const fs::path& log) {
  const std::string cmd = "env -u EMOE_CONFIG '" + env.cli + "' " + args + " >>'" + log.string() + "' 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

fs::path fresh_dir(const fs::path& p) {
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

/// Desk config without its [paths] section, so artifacts land next to the
/// copy; `overrides` replaces or appends "section.key" values.
std::string desk_config(const std::map<std::string, std::string>& overrides = {}) {
  std::istringstream in(read_file(fs::path(EMOE_SOURCE_DIR) / "configs" / "desk.toml"));
  std::string line, section, out;
  std::set<std::string> used;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t");
    if (first != std::string::npos && line[first] == '[') {
      section = line.substr(first + 1, line.find(']') - first - 1);
      if (section != "paths") out += line + "\n";
      continue;
    }
    if (section == "paths") continue;
    const auto eq = line.find('=');
    if (eq != std::string::npos && first != std::string::npos && line[first] != '#') {
      std::string key = line.substr(first, eq - first);
      key.erase(key.find_last_not_of(" \t") + 1);
      auto it = overrides.find(section + "." + key);
      if (it != overrides.end()) {
        out += key + " = " + it->second + "\n";
        used.insert(it->first);
        continue;
      }
    }
    out += line + "\n";
  }
  for (const auto& [k, v] : overrides) {
    if (used.count(k)) continue;
    const auto dot = k.find('.');
    out += "[" + k.substr(0, dot) + "]\n" + k.substr(dot + 1) + " = " + v + "\n";
  }
  return out;
}

// ---------------------------------------------------------------- 1

Outcome gradient_integrity(const Env& env) {
  const auto dir = fresh_dir(env.work / "gradcheck");
  write_file_atomic(dir / "cfg.toml", desk_config());
  const auto t0 = Clock::now();
  const int code = run_cli(env, "gradcheck --tol 1e-4 --config '" + (dir / "cfg.toml").string() + "'", dir / "log.txt");
  const double secs = seconds_since(t0);
  if (!fs::exists(dir / "run" / "gradcheck.json")) return {false, "no report, exit " + std::to_string(code)};
  const auto j = nlohmann::json::parse(read_file(dir / "run" / "gradcheck.json"));
  const double err = j.at("max_rel_error");
  const bool ok = code == 0 && j.at("passed").get<bool>() && err <= 1e-4 && secs <= 300.0;
  return {ok, std::to_string(j.at("params").size()) + " parameters, " + std::to_string(j.at("checked").get<std::size_t>()) +
                  " entries, max rel err " + num(err, 3) + ", " + num(secs, 3) + " s"};
}

// ---------------------------------------------------------------- 2

InteractionIntervals exhaustive_intervals(const Trajectory& ego, const Extent& ee, const std::vector<Agent>& agents) {
  InteractionIntervals out;
  std::vector<std::pair<int, int>> spans;
  for (const auto& a : agents) {
    int t_in = 0, t_out = 0, ego_at_in = 0;
    for (std::size_t te = 0; te < ego.size(); ++te)
      for (std::size_t ta = 0; ta < a.future_gt->size(); ++ta) {
        if (!obb_overlap(ego[te].pose(), ee, (*a.future_gt)[ta].pose(), a.extent, kInteractionMargin)) continue;
        const int e = static_cast<int>(te) + 1, g = static_cast<int>(ta) + 1;
        if (t_in == 0 || g < t_in || (g == t_in && e < ego_at_in)) {
          t_in = g;
          ego_at_in = e;
        }
        t_out = std::max(t_out, g);
      }
    if (t_in == 0) continue;
    out.per_agent.push_back(
        {a.id, t_in, t_out, ego_at_in < t_in ? InteractionLabel::Overtake : InteractionLabel::Yield});
    spans.emplace_back(t_in, t_out);
  }
  std::sort(spans.begin(), spans.end());
  for (const auto& s : spans) {
    if (!out.spans.empty() && s.first <= out.spans.back().second + 1)
      out.spans.back().second = std::max(out.spans.back().second, s.second);
    else
      out.spans.push_back(s);
  }
  return out;
}

Outcome interaction_oracle(const Env&) {
  std::size_t n = 0, mismatches = 0, with_spans = 0, agents = 0;
  for (ScenarioType t : kAllScenarioTypes)
    for (const auto& s : generate_synthetic(2024, t, 72)) {
      if (n == 500) break;
      ++n;
      std::vector<Agent> ag = s.agents;
      for (auto& a : ag) a.future_gt = a.future_gt->head(80);
      const auto iv = extract_intervals(s, 80);
      mismatches += !(iv == exhaustive_intervals(s.ego_future_gt->head(80), s.ego.extent, ag));
      with_spans += !iv.spans.empty();
      agents += iv.per_agent.size();
    }
  return {n == 500 && mismatches == 0,
          std::to_string(n) + " scenes, " + std::to_string(mismatches) + " mismatches, " +
              std::to_string(with_spans) + " with spans, " + std::to_string(agents) + " interacting agents"};
}

// ---------------------------------------------------------------- 3

Outcome temporal_weights_check(const Env&) {
  const double k_r = 0.02;
  const auto empty = temporal_weights(80, k_r, {});
  const double w80 = empty.w[79];
  bool ok = std::abs(w80 - 0.201897) <= 1e-6;
  std::size_t in_span = 0, checked = 0;
  for (ScenarioType t : kAllScenarioTypes)
    for (const auto& s : generate_synthetic(77, t, 20)) {
      const auto iv = extract_intervals(s, 80);
      const auto w = temporal_weights(80, k_r, iv);
      double prev = 2.0;
      for (int step = 1; step <= 80; ++step) {
        const double v = w.w[static_cast<std::size_t>(step - 1)];
        bool inside = false;
        for (const auto& [a, b] : iv.spans) inside |= step >= a && step <= b;
        ++checked;
        if (inside) {
          ++in_span;
          ok &= v == 1.0;
        } else {
          ok &= std::abs(v - std::exp(-k_r * step)) <= 1e-12 && v <= prev;
          prev = v;
        }
      }
    }
  return {ok && in_span > 0, "w_80 = " + num(w80, 8) + ", " + std::to_string(in_span) + " in-span steps of " +
                                 std::to_string(checked)};
}

// ---------------------------------------------------------------- 4

struct Dataset {
  std::vector<Scene> scenes;
  AnchorBank bank;
};

const Dataset& shared_data() {
  static const Dataset d = [] {
    Dataset x;
    for (ScenarioType t : kAllScenarioTypes) {
      auto v = generate_synthetic(11, t, 40);
      for (auto& s : v) s.label = label_scenario(s);
      x.scenes.insert(x.scenes.end(), v.begin(), v.end());
    }
    x.bank = build_bank(x.scenes, 24, 1);
    return x;
  }();
  return d;
}

Outcome expert_isolation(const Env&) {
  const auto& d = shared_data();
  NetConfig nc;  // full size
  EMoEPlanner net(nc);
  TrainConfig tc;
  tc.batch_size = 7;
  Rng rng(9);
  std::vector<Scene> pool;
  for (std::size_t i = 0; i < 28; ++i) pool.push_back(d.scenes[rng.index(d.scenes.size())]);
  Trainer tr(net, d.bank, pool, tc);
  std::size_t batches = 0, bad_grad = 0, bad_count = 0, zero_experts = 0;
  for (std::size_t b = 0; b < 4; ++b) {
    std::vector<std::size_t> batch;
    std::array<std::size_t, kNumScenarioTypes> hist{};
    for (std::size_t i = 0; i < 7; ++i) {
      batch.push_back(b * 7 + i);
      ++hist[static_cast<std::size_t>(index_of(*pool[b * 7 + i].label))];
    }
    const auto st = tr.step(batch);
    ++batches;
    bad_count += st.expert_counts != hist;
    const auto& g = *tr.last_gradients();
    for (std::size_t e = 0; e < kNumScenarioTypes; ++e) {
      double mass = 0.0;
      for (std::size_t pi : net.expert_params(e))
        for (double v : g.g[pi].d) mass += std::abs(v);
      if (hist[e] == 0) {
        ++zero_experts;
        bad_grad += mass != 0.0;
      } else {
        bad_grad += !(mass > 0.0);
      }
    }
  }
  return {bad_grad == 0 && bad_count == 0 && zero_experts > 0,
          std::to_string(batches) + " batches at full size, " + std::to_string(zero_experts) +
              " idle expert checks, " + std::to_string(bad_grad) + " gradient violations, " +
              std::to_string(bad_count) + " count mismatches"};
}

// ---------------------------------------------------------------- 5

Outcome anchor_confinement(const Env&) {
  const auto& d = shared_data();
  const NetConfig nc;
  EMoEPlanner net(nc);
  Rng rng(5);
  std::size_t trials = 0, differ = 0;
  std::string shape;
  for (std::size_t i = 0; i < d.scenes.size(); i += 40) {
    const Scene& s = d.scenes[i];
    const auto base = net.infer(s, d.bank);
    AnchorBank noisy = d.bank;
    for (ScenarioType t : kAllScenarioTypes) {
      if (t == base.router.chosen) continue;
      for (auto& a : noisy.slice(t)) a = {a.x + rng.normal() * 5.0, a.y + rng.normal() * 5.0};
    }
    const auto pert = net.infer(s, noisy);
    ++trials;
    const bool same = pert.ego_modes == base.ego_modes && pert.mode_probs == base.mode_probs &&
                      pert.agent_preds == base.agent_preds && pert.router.logits == base.router.logits;
    differ += !same;
    nn::Graph g;
    const auto r = net.forward(g, s, d.bank);
    const auto& q = g.value(r.queries);
    shape = std::to_string(q.rows) + "x" + std::to_string(q.cols);
  }
  return {differ == 0 && shape == "24x128",
          std::to_string(trials) + " scenes, " + std::to_string(differ) + " changed outputs, query shape " + shape};
}

// ---------------------------------------------------------------- 6

Outcome kmeans_properties(const Env&) {
  Rng rng(6);
  std::size_t increases = 0, iterations = 0;
  for (int ds = 0; ds < 100; ++ds) {
    const std::size_t n = 40 + rng.index(300);
    std::vector<Vec2> pts(n);
    for (auto& p : pts) p = {rng.uniform(-60, 60), rng.uniform(-60, 60)};
    const auto r = kmeans(pts, 1 + rng.index(24), rng.bits());
    iterations += r.sse_history.size();
    for (std::size_t i = 1; i < r.sse_history.size(); ++i) increases += r.sse_history[i] > r.sse_history[i - 1];
  }
  double worst_exact = 0.0;
  for (int ds = 0; ds < 20; ++ds) {
    const std::size_t n = 1 + rng.index(40);
    std::vector<Vec2> pts(n);
    for (std::size_t i = 0; i < n; ++i) pts[i] = {static_cast<double>(i) * 1.5 + rng.uniform(0, 1), rng.uniform(-9, 9)};
    worst_exact = std::max(worst_exact, kmeans(pts, n, rng.bits()).sse());
  }
  return {increases == 0 && worst_exact == 0.0, "100 datasets, " + std::to_string(iterations) + " SSE values, " +
                                                    std::to_string(increases) + " increases; k = n SSE " +
                                                    num(worst_exact)};
}

// ---------------------------------------------------------------- 7

Outcome overfit_sanity(const Env&) {
  const auto t0 = Clock::now();
  const auto& d = shared_data();
  std::vector<Scene> ds;
  for (std::size_t i = 0; i < 64; ++i) ds.push_back(d.scenes[(i % 7) * 40 + i / 7]);
  NetConfig nc;
  nc.d = 32;
  nc.heads = 4;
  nc.expert_hidden = 64;
  nc.ffn_hidden = 64;
  nc.enc_layers = 2;
  nc.dec_layers = 2;
  nc.mixer_token_hidden = 16;
  nc.drop_prob = 0.0;
  EMoEPlanner net(nc);
  TrainConfig tc;
  tc.batch_size = 16;
  tc.max_steps = 2000;
  tc.lr = 2e-3;
  tc.cosine_decay = true;
  Trainer tr(net, d.bank, ds, tc);
  const double initial = tr.evaluate().total;
  tr.run();
  const double final_loss = tr.evaluate().total;
  double ade = 0.0;
  std::size_t router_ok = 0;
  for (const auto& s : ds) {
    const auto out = net.infer(s, d.bank);
    const auto& mode = out.ego_modes[argmax_lowest(out.mode_probs.data(), out.mode_probs.size())];
    const auto& gt = *s.ego_future_gt;
    double a = 0.0;
    for (std::size_t t = 0; t < 80; ++t) a += std::hypot(mode[t].x - gt[t].x, mode[t].y - gt[t].y);
    ade += a / 80.0;
    router_ok += out.router.chosen == *s.label;
  }
  ade /= 64.0;
  const double ratio = final_loss / initial;
  const double acc = static_cast<double>(router_ok) / 64.0;
  const double secs = seconds_since(t0);
  return {tr.steps_taken() <= 2000 && ratio < 0.05 && ade < 0.5 && acc >= 0.99 && secs <= 900.0,
          std::to_string(tr.steps_taken()) + " steps, loss ratio " + num(ratio, 3) + ", ADE " + num(ade, 3) +
              " m, router " + std::to_string(router_ok) + "/64, " + num(secs, 3) + " s"};
}

// ---------------------------------------------------------------- 8

std::array<Vec2, 4> corners(const Pose2& p, const Extent& e) {
  const FrameTransform f{p};
  const double l = 0.5 * e.length, w = 0.5 * e.width;
  return {f.point_to_world({l, w}), f.point_to_world({-l, w}), f.point_to_world({-l, -w}), f.point_to_world({l, -w})};
}

double point_segment(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double u = std::clamp(((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / (ab.x * ab.x + ab.y * ab.y), 0.0, 1.0);
  return std::hypot(p.x - a.x - u * ab.x, p.y - a.y - u * ab.y);
}

// Distance from tangency: gap when apart, smallest axis penetration when
// overlapping.
double tangency_distance(const Pose2& pa, const Extent& ea, const Pose2& pb, const Extent& eb) {
  const auto ca = corners(pa, ea), cb = corners(pb, eb);
  double depth = 1e300;
  bool separated = false;
  for (const auto* c : {&ca, &cb})
    for (int k = 0; k < 2; ++k) {
      const Vec2 edge = (*c)[k + 1] - (*c)[k];
      const double len = std::hypot(edge.x, edge.y);
      const Vec2 axis{-edge.y / len, edge.x / len};
      double a0 = 1e300, a1 = -1e300, b0 = 1e300, b1 = -1e300;
      for (const auto& v : ca) a0 = std::min(a0, v.x * axis.x + v.y * axis.y), a1 = std::max(a1, v.x * axis.x + v.y * axis.y);
      for (const auto& v : cb) b0 = std::min(b0, v.x * axis.x + v.y * axis.y), b1 = std::max(b1, v.x * axis.x + v.y * axis.y);
      const double overlap = std::min(a1, b1) - std::max(a0, b0);
      if (overlap < 0.0) separated = true;
      depth = std::min(depth, overlap);
    }
  if (!separated) return depth;
  double gap = 1e300;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      gap = std::min(gap, point_segment(ca[i], cb[j], cb[(j + 1) % 4]));
      gap = std::min(gap, point_segment(cb[i], ca[j], ca[(j + 1) % 4]));
    }
  return gap;
}

bool sampled_overlap(const Pose2& pa, const Extent& ea, const Pose2& pb, const Extent& eb, Rng& rng, int n) {
  auto probe = [&](const Pose2& src, const Extent& es, const Pose2& dst, const Extent& ed) {
    const FrameTransform f{src}, g{dst};
    const double perim = 2.0 * (es.length + es.width);
    for (int i = 0; i < n; ++i) {
      Vec2 local;
      if (i % 2 == 0) {
        double u = rng.uniform() * perim;
        if (u < es.length) local = {u - 0.5 * es.length, 0.5 * es.width};
        else if ((u -= es.length) < es.width) local = {0.5 * es.length, u - 0.5 * es.width};
        else if ((u -= es.width) < es.length) local = {0.5 * es.length - u, -0.5 * es.width};
        else local = {-0.5 * es.length, u - es.length - 0.5 * es.width};
      } else {
        local = {rng.uniform(-0.5, 0.5) * es.length, rng.uniform(-0.5, 0.5) * es.width};
      }
      const Vec2 q = g.point_to_local(f.point_to_world(local));
      if (std::abs(q.x) <= 0.5 * ed.length && std::abs(q.y) <= 0.5 * ed.width) return true;
    }
    return false;
  };
  return probe(pb, eb, pa, ea) || probe(pa, ea, pb, eb);
}

Outcome geometry_oracle(const Env&) {
  Rng rng(8);
  std::size_t agree = 0, overlaps = 0, near_tangent_disagree = 0, far_disagree = 0;
  for (int i = 0; i < 1000; ++i) {
    const Extent ea{rng.uniform(0.5, 6.0), rng.uniform(0.3, 3.0)}, eb{rng.uniform(0.5, 6.0), rng.uniform(0.3, 3.0)};
    const Pose2 pa{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-kPi, kPi)};
    const Pose2 pb{rng.uniform(-6, 6), rng.uniform(-4, 4), rng.uniform(-kPi, kPi)};
    const bool sat = obb_overlap(pa, ea, pb, eb);
    const bool oracle = sampled_overlap(pa, ea, pb, eb, rng, 50000);
    overlaps += sat;
    if (sat == oracle) {
      ++agree;
    } else if (tangency_distance(pa, ea, pb, eb) <= 1e-3) {
      ++near_tangent_disagree;
    } else {
      ++far_disagree;
    }
  }
  return {agree >= 999 && far_disagree == 0,
          "1000 pairs (" + std::to_string(overlaps) + " overlapping), agreement " + num(agree / 10.0) + "%, " +
              std::to_string(near_tangent_disagree) + " near-tangent and " + std::to_string(far_disagree) +
              " other disagreements"};
}

// ---------------------------------------------------------------- 9

struct DeskRun {
  bool ok = false;
  std::string error;
  fs::path dir;
};

const DeskRun& desk_pipeline(const Env& env) {
  static DeskRun run = [&] {
    DeskRun r;
    r.dir = fresh_dir(env.work / "desk");
    write_file_atomic(r.dir / "cfg.toml", desk_config());
    const std::string cfg = " --config '" + (r.dir / "cfg.toml").string() + "'";
    for (const char* step : {"generate", "label", "anchors", "train", "simulate --horizon 15 --replan-hz 1",
                             "report --format csv", "report --format svg"}) {
      const int code = run_cli(env, std::string(step) + cfg, r.dir / "log.txt");
      if (code != 0) {
        r.error = std::string(step) + " exited " + std::to_string(code);
        return r;
      }
    }
    r.ok = true;
    return r;
  }();
  return run;
}

Outcome closed_loop_smoke(const Env& env) {
  const auto& desk = desk_pipeline(env);
  if (!desk.ok) return {false, desk.error};
  const auto j = nlohmann::json::parse(read_file(desk.dir / "run" / "simlog.json"));
  std::map<std::string, std::size_t> per_type;
  std::size_t out_of_range = 0, short_runs = 0;
  for (const auto& r : j.at("runs")) {
    const std::string id = r.at("scene_id");
    ++per_type[id.substr(0, id.rfind('-'))];
    short_runs += r.at("steps").get<std::size_t>() != 150 || r.at("ego").size() != 151;
    for (const auto& [k, v] : r.at("metrics").items()) out_of_range += !(v.get<double>() >= 0.0 && v.get<double>() <= 1.0);
  }
  bool twenty = per_type.size() == kNumScenarioTypes;
  for (const auto& [t, n] : per_type) twenty &= n == 20;

  const Config c = load_config(desk.dir / "cfg.toml");
  const auto scenes = sim_scenes(c);
  const auto gt = simulate_planner(c, scenes, [](const Scene& w) { return sim::gt_replay_planner(w); });
  double col = 1.0, drv = 1.0, prog = 1.0;
  for (const auto& r : gt) {
    col = std::min(col, r.metrics.collisions);
    drv = std::min(drv, r.metrics.drivable);
    prog = std::min(prog, r.metrics.progress);
  }
  const std::string csv = read_file(desk.dir / "run" / "report.csv");
  const bool table = std::count(csv.begin(), csv.end(), '\n') == 8;
  return {twenty && short_runs == 0 && out_of_range == 0 && col == 1.0 && drv == 1.0 && prog >= 0.95 && table,
          std::to_string(j.at("runs").size()) + " planner runs of 15 s, " + std::to_string(out_of_range) +
              " metrics outside [0, 1]; replay min collisions " + num(col) + ", drivable " + num(drv) +
              ", progress " + num(prog)};
}

// ---------------------------------------------------------------- 10

Outcome ablation_direction(const Env& env) {
  const auto& desk = desk_pipeline(env);
  if (!desk.ok) return {false, desk.error};
  const int code = run_cli(env, "ablate --switch emoe --switch ssq --switch iloss --config '" +
                                    (desk.dir / "cfg.toml").string() + "'",
                           desk.dir / "log.txt");
  const auto csv_path = desk.dir / "run" / "ablation" / "ablation.csv";
  if (code != 0 || !fs::exists(csv_path)) return {false, "ablate exited " + std::to_string(code)};
  std::istringstream in(read_file(csv_path));
  std::string line;
  std::getline(in, line);
  const bool header = line == "variant,final_loss,runs,collisions,drivable,ttc,progress,speed,comfort,composite";
  std::map<std::string, double> score;
  while (std::getline(in, line)) score[line.substr(0, line.find(','))] = std::stod(line.substr(line.rfind(',') + 1));
  const bool rows = score.size() == 4 && score.count("full") && score.count("emoe") && score.count("ssq") &&
                    score.count("iloss");
  // Switches all on reproduces the base training run byte for byte.
  const bool noop = read_file(desk.dir / "run" / "ablation" / "full.ckpt") == read_file(desk.dir / "run" / "model.ckpt");
  std::string detail = "full " + num(score["full"]) + ", w/o EMoE " + num(score["emoe"]) + ", w/o SSQ " +
                       num(score["ssq"]) + ", w/o I-Loss " + num(score["iloss"]);
  std::vector<std::string> above;
  for (const char* v : {"emoe", "ssq", "iloss"})
    if (score[v] > score["full"]) above.push_back(v);
  if (above.empty()) {
    detail += "; ordering holds";
  } else {
    detail += "; finding: full model below";
    for (const auto& v : above) detail += " " + v;
  }
  return {header && rows && noop, detail, !above.empty()};
}

// ---------------------------------------------------------------- 11

Outcome determinism(const Env& env) {
  const std::vector<std::string> artifacts = {
      "scenes.jsonl", "labeled.jsonl", "anchors.json", "anchors.svg", "model.ckpt",
      "metrics.csv",  "simlog.json",   "report.csv",   "report.svg"};
  const std::string text = desk_config({{"data.per_type", "26"},
                                        {"train.max_steps", "24"},
                                        {"train.batch_size", "8"},
                                        {"sim.scenes_per_type", "2"}});
  std::vector<fs::path> dirs;
  int idx = 0;
  for (int threads : {1, 1, 4}) {
    const auto dir = fresh_dir(env.work / ("determinism_" + std::to_string(idx++)));
    write_file_atomic(dir / "cfg.toml", text);
    const std::string cfg = " --config '" + (dir / "cfg.toml").string() + "' --threads " + std::to_string(threads);
    for (const char* step : {"generate --seed 5", "label", "anchors", "train", "simulate", "report --format csv",
                             "report --format svg"})
      if (run_cli(env, std::string(step) + cfg, dir / "log.txt") != 0)
        return {false, std::string(step) + " failed with " + std::to_string(threads) + " threads"};
    dirs.push_back(dir / "run");
  }
  std::size_t differ = 0;
  std::string which;
  for (const auto& a : artifacts) {
    const std::string ref = read_file(dirs[0] / a);
    for (std::size_t i = 1; i < dirs.size(); ++i)
      if (read_file(dirs[i] / a) != ref) {
        ++differ;
        which += " " + a;
      }
  }
  return {differ == 0, std::to_string(artifacts.size()) + " artifacts compared over 2 runs and threads {1, 4}, " +
                           std::to_string(differ) + " differ" + which};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  Env env;
  std::string work;
  std::vector<int> only;
  app.add_option("--workdir", work, "Scratch directory")->required();
  app.add_option("--cli", env.cli, "Path to the emoe executable")->required()->check(CLI::ExistingFile);
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  env.work = fs::absolute(work);
  fs::create_directories(env.work);

  const std::vector<std::pair<std::string, std::function<Outcome(const Env&)>>> criteria = {
      {"gradient integrity", gradient_integrity},
      {"interaction oracle equivalence", interaction_oracle},
      {"temporal weight values", temporal_weights_check},
      {"expert isolation and load balance", expert_isolation},
      {"anchor confinement", anchor_confinement},
      {"k-means properties", kmeans_properties},
      {"overfit sanity", overfit_sanity},
      {"geometry oracle", geometry_oracle},
      {"closed-loop smoke and metric bounds", closed_loop_smoke},
      {"ablation direction", ablation_direction},
      {"determinism", determinism},
  };
  std::size_t failed = 0, findings = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second(env);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    findings += o.pass && o.finding;
    const char* status = !o.pass ? "FAIL" : o.finding ? "FINDING" : "PASS";
    std::cout << "[" << (id < 10 ? " " : "") << id << "] " << status << "  " << criteria[i].first
              << ": " << o.detail << " (" << num(seconds_since(t0), 3) << " s)" << std::endl;
  }
  std::cout << (failed == 0 ? "no criteria failed" : std::to_string(failed) + " criteria failed");
  if (findings > 0) std::cout << ", " << findings << " with findings (report produced, property not met)";
  std::cout << std::endl;
  return failed == 0 ? 0 : 1;
}
