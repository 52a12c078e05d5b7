#pragma once

#include <array>
#include <cmath>
#include <exception>
#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "emoe/nn/adam.hpp"
#include "emoe/nn/checkpoint.hpp"
#include "emoe/training/loss.hpp"

namespace emoe {

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 35;
  std::size_t max_steps = 0;  // when positive, stop after this many optimizer steps
  double k_r = 0.02;
  LossWeights weights;
  std::uint64_t seed = 7;
  std::size_t threads = 1;
  std::size_t per_type_cap = 500;  // scenes kept per scenario type
  bool interaction_weights = true;  // false: uniform step weights
  bool cosine_decay = false;        // anneal lr to zero over the run

  void validate() const {
    if (!(lr > 0.0)) throw InvalidArgument("train: lr must be positive");
    if (batch_size == 0) throw InvalidArgument("train: batch size must be positive");
    if (epochs == 0 && max_steps == 0) throw InvalidArgument("train: epochs must be positive");
    if (k_r < 0.0) throw InvalidArgument("train: k_R must be non-negative");
    if (threads == 0) throw InvalidArgument("train: threads must be positive");
  }
};

/// Aborted run; the last good parameters were written to `checkpoint`.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, std::filesystem::path ckpt)
      : std::runtime_error(what), checkpoint(std::move(ckpt)) {}
  std::filesystem::path checkpoint;
};

struct StepStats {
  std::size_t step = 0;
  std::size_t epoch = 0;
  LossReport mean;  // batch mean of every component
  double router_acc = 0.0;
  std::array<std::size_t, kNumScenarioTypes> expert_counts{};
  std::array<std::size_t, kNumScenarioTypes> label_hist{};
  bool isolation_ok = true;  // non-routed experts received exactly zero gradient
};

inline std::string metrics_csv_header() { return "step,total,reg,cls,col,pred,router,router_acc\n"; }

inline std::string metrics_csv_row(const StepStats& s) {
  std::ostringstream os;
  os.precision(17);
  os << s.step << ',' << s.mean.total << ',' << s.mean.reg << ',' << s.mean.cls << ',' << s.mean.col << ','
     << s.mean.pred << ',' << s.mean.router << ',' << s.router_acc << '\n';
  return os.str();
}

/// Keeps at most `cap` scenes of each label, in input order.
inline std::vector<Scene> cap_per_type(const std::vector<Scene>& scenes, std::size_t cap) {
  std::array<std::size_t, kNumScenarioTypes> seen{};
  std::vector<Scene> out;
  for (const auto& s : scenes) {
    const ScenarioType t = s.label ? *s.label : label_scenario(s);
    if (seen[static_cast<std::size_t>(index_of(t))]++ < cap) out.push_back(s);
  }
  return out;
}

class Trainer {
 public:
  Trainer(EMoEPlanner& net, const AnchorBank& bank, std::vector<Scene> scenes, TrainConfig cfg)
      : net_(net), bank_(bank), scenes_(std::move(scenes)), cfg_(cfg), adam_(net.params(), {cfg.lr}) {
    cfg_.validate();
    if (scenes_.empty()) throw InvalidArgument("train: empty dataset");
    const NetConfig& nc = net_.config();
    for (const auto& s : scenes_) targets_.push_back(make_targets(s, bank_, nc.t_f(), cfg_.k_r, cfg_.interaction_weights));
    for (std::size_t i = 0; i < cfg_.batch_size; ++i) sample_grads_.emplace_back(net_.params());
  }

  const std::vector<SampleTargets>& targets() const { return targets_; }
  const std::vector<Scene>& scenes() const { return scenes_; }
  std::size_t steps_taken() const { return step_; }

  /// One optimizer step on the given scene indices.
  StepStats step(const std::vector<std::size_t>& batch, std::size_t epoch = 0) {
    if (batch.empty() || batch.size() > sample_grads_.size()) throw InvalidArgument("train: bad batch size");
    const std::size_t n = batch.size();
    std::vector<LossReport> reports(n);
    std::vector<std::size_t> experts(n);
    std::vector<std::exception_ptr> errors(n);

    auto work = [&](std::size_t w, std::size_t workers) {
      for (std::size_t i = w; i < n; i += workers) {
        try {
          sample_grads_[i].zero();
          const std::size_t idx = batch[i];
          const SampleTargets& tg = targets_[idx];
          nn::Graph g;
          ForwardOptions fo;
          fo.training = true;
          fo.force_route = tg.label;
          fo.pred_mode = tg.target_mode;
          fo.dropout_seed = derive_seed(cfg_.seed, 0xd409 + step_, idx);
          const ForwardResult f = net_.forward(g, scenes_[idx], bank_, fo);
          reports[i] = total_loss(g, f, tg, cfg_.weights);
          experts[i] = f.expert;
          g.backward();
          g.accumulate(sample_grads_[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    const std::size_t workers = std::min(cfg_.threads, n);
    if (workers <= 1) {
      work(0, 1);
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    }

    StepStats st;
    st.step = step_;
    st.epoch = epoch;
    for (std::size_t i = 0; i < n; ++i) {
      if (errors[i]) abort_run(errors[i]);
      if (!std::isfinite(reports[i].total)) abort_run(nullptr);
    }

    // Ordered reduction: sample 0 first, independent of the worker count.
    nn::GradBuffer total(net_.params());
    for (std::size_t i = 0; i < n; ++i) total.add(sample_grads_[i]);
    total.scale(1.0 / static_cast<double>(n));

    for (std::size_t i = 0; i < n; ++i) {
      const auto& r = reports[i];
      st.mean.total += r.total;
      st.mean.reg += r.reg;
      st.mean.cls += r.cls;
      st.mean.col += r.col;
      st.mean.pred += r.pred;
      st.mean.router += r.router;
      st.router_acc += r.router_correct ? 1.0 : 0.0;
      ++st.expert_counts[experts[i]];
      ++st.label_hist[static_cast<std::size_t>(index_of(targets_[batch[i]].label))];
    }
    const double inv = 1.0 / static_cast<double>(n);
    for (double* v : {&st.mean.total, &st.mean.reg, &st.mean.cls, &st.mean.col, &st.mean.pred, &st.mean.router,
                      &st.router_acc})
      *v *= inv;
    st.mean.weights = cfg_.weights;

    if (net_.config().emoe) {
      for (std::size_t e = 0; e < kNumScenarioTypes; ++e) {
        if (st.expert_counts[e] != st.label_hist[e]) st.isolation_ok = false;
        if (st.expert_counts[e] > 0) continue;
        for (std::size_t pi : net_.expert_params(e))
          for (double v : total.g[pi].d)
            if (v != 0.0) st.isolation_ok = false;
      }
    }
    last_grads_ = std::move(total);

    last_good_.clear();
    for (std::size_t i = 0; i < net_.params().size(); ++i) last_good_.push_back(net_.params()[i].value);
    if (cfg_.cosine_decay) adam_.set_lr(lr_at(step_));
    adam_.step(net_.params(), *last_grads_);
    ++step_;
    return st;
  }

  /// Runs epochs of shuffled mini-batches. `on_step` sees every step.
  std::vector<StepStats> run(const std::function<void(const StepStats&)>& on_step = {}) {
    std::vector<StepStats> log;
    const std::size_t n = scenes_.size();
    for (std::size_t epoch = 0;; ++epoch) {
      if (cfg_.max_steps == 0 && epoch >= cfg_.epochs) break;
      std::vector<std::size_t> order(n);
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      Rng rng(derive_seed(cfg_.seed, 0x5eed, epoch));
      rng.shuffle(order.begin(), order.end());
      for (std::size_t b = 0; b < n; b += cfg_.batch_size) {
        if (cfg_.max_steps > 0 && step_ >= cfg_.max_steps) return log;
        std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(b),
                                       order.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + cfg_.batch_size)));
        log.push_back(step(batch, epoch));
        if (on_step) on_step(log.back());
      }
    }
    return log;
  }

  /// Dataset-mean loss without dropout, under teacher forcing.
  LossReport evaluate() const {
    LossReport m;
    for (std::size_t i = 0; i < scenes_.size(); ++i) {
      nn::Graph g;
      ForwardOptions fo;
      fo.force_route = targets_[i].label;
      fo.pred_mode = targets_[i].target_mode;
      const auto r = total_loss(g, net_.forward(g, scenes_[i], bank_, fo), targets_[i], cfg_.weights, false);
      m.total += r.total;
      m.reg += r.reg;
      m.cls += r.cls;
      m.col += r.col;
      m.pred += r.pred;
      m.router += r.router;
    }
    const double inv = 1.0 / static_cast<double>(scenes_.size());
    for (double* v : {&m.total, &m.reg, &m.cls, &m.col, &m.pred, &m.router}) *v *= inv;
    m.weights = cfg_.weights;
    return m;
  }

  /// Mean gradient of the last step.
  const std::optional<nn::GradBuffer>& last_gradients() const { return last_grads_; }

  void set_abort_checkpoint(std::filesystem::path p) { abort_ckpt_ = std::move(p); }

  std::size_t planned_steps() const {
    if (cfg_.max_steps > 0) return cfg_.max_steps;
    return cfg_.epochs * ((scenes_.size() + cfg_.batch_size - 1) / cfg_.batch_size);
  }

  double lr_at(std::size_t step) const {
    if (!cfg_.cosine_decay) return cfg_.lr;
    const double u = std::min(1.0, static_cast<double>(step) / static_cast<double>(planned_steps()));
    return 0.5 * cfg_.lr * (1.0 + std::cos(kPi * u));
  }

 private:
  [[noreturn]] void abort_run(std::exception_ptr err) {
    std::string what = "non-finite loss";
    if (err) {
      try {
        std::rethrow_exception(err);
      } catch (const nn::NumericError& e) {
        what = e.what();
      } catch (...) {
        throw;
      }
    }
    if (!last_good_.empty())
      for (std::size_t i = 0; i < net_.params().size(); ++i) net_.params()[i].value = last_good_[i];
    if (!abort_ckpt_.empty()) nn::save_checkpoint(net_.params(), to_json(net_.config()).dump(), abort_ckpt_);
    throw TrainingAborted("training aborted at step " + std::to_string(step_) + ": " + what, abort_ckpt_);
  }

  EMoEPlanner& net_;
  const AnchorBank& bank_;
  std::vector<Scene> scenes_;
  TrainConfig cfg_;
  nn::Adam adam_;
  std::vector<SampleTargets> targets_;
  std::vector<nn::GradBuffer> sample_grads_;
  std::optional<nn::GradBuffer> last_grads_;
  std::vector<nn::Mat> last_good_;  // parameter values before the latest update
  std::filesystem::path abort_ckpt_;
  std::size_t step_ = 0;
};

}  // namespace emoe
