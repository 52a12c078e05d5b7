#pragma once

#include <cmath>
#include <vector>

#include "emoe/nn/param.hpp"

namespace emoe::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// Adam with per-tensor step counts. A tensor whose gradient is exactly zero
/// this step is left untouched, so experts that were not routed do not drift
/// on stale moments.
class Adam {
 public:
  Adam(const ParamStore& ps, AdamConfig cfg = {}) : cfg_(cfg) {
    for (std::size_t i = 0; i < ps.size(); ++i) {
      m_.emplace_back(ps[i].value.rows, ps[i].value.cols);
      v_.emplace_back(ps[i].value.rows, ps[i].value.cols);
    }
    t_.assign(ps.size(), 0);
  }

  void step(ParamStore& ps, const GradBuffer& grads) {
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const Mat& g = grads.g[i];
      bool any = false;
      for (double x : g.d)
        if (x != 0.0) {
          any = true;
          break;
        }
      if (!any) continue;
      Mat& w = ps[i].value;
      const double t = static_cast<double>(++t_[i]);
      const double c1 = 1.0 - std::pow(cfg_.beta1, t), c2 = 1.0 - std::pow(cfg_.beta2, t);
      for (std::size_t k = 0; k < w.d.size(); ++k) {
        const double gk = g.d[k] + cfg_.weight_decay * w.d[k];
        m_[i].d[k] = cfg_.beta1 * m_[i].d[k] + (1.0 - cfg_.beta1) * gk;
        v_[i].d[k] = cfg_.beta2 * v_[i].d[k] + (1.0 - cfg_.beta2) * gk * gk;
        w.d[k] -= cfg_.lr * (m_[i].d[k] / c1) / (std::sqrt(v_[i].d[k] / c2) + cfg_.eps);
      }
    }
  }

  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  AdamConfig cfg_;
  std::vector<Mat> m_, v_;
  std::vector<long> t_;
};

}  // namespace emoe::nn
