#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "emoe/nn/param.hpp"

namespace emoe::nn {

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  bool finite = true;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double tolerance = 0.0;
  std::size_t checked = 0;  // scalar entries compared

  double max_rel_error() const {
    double m = 0.0;
    for (const auto& p : params) m = std::max(m, p.max_rel_error);
    return m;
  }
  bool passed() const {
    for (const auto& p : params)
      if (!p.finite || p.max_rel_error > tolerance) return false;
    return true;
  }
};

struct GradCheckOptions {
  double step = 1e-4;
  double tolerance = 1e-4;
  // Denominator floor of the relative error; keeps round-off on near-zero
  // gradients from reading as a large relative error.
  double floor = 1e-6;
};

/// Central differences of `loss` against `analytic` for every scalar of every
/// parameter. `loss` re-evaluates the objective at the current values;
/// `analytic` fills a zeroed buffer with the gradient at the current values.
inline GradCheckReport grad_check(ParamStore& ps, const std::function<double()>& loss,
                                  const std::function<void(GradBuffer&)>& analytic,
                                  const GradCheckOptions& opt = {}) {
  GradBuffer g(ps);
  analytic(g);
  GradCheckReport rep;
  rep.tolerance = opt.tolerance;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Parameter& p = ps[i];
    ParamCheck pc;
    pc.name = p.name;
    for (std::size_t k = 0; k < p.value.d.size(); ++k) {
      const double a = g.g[i].d[k];
      const double orig = p.value.d[k];
      p.value.d[k] = orig + opt.step;
      const double up = loss();
      p.value.d[k] = orig - opt.step;
      const double dn = loss();
      p.value.d[k] = orig;
      const double num = (up - dn) / (2.0 * opt.step);
      ++rep.checked;
      if (!std::isfinite(a) || !std::isfinite(num)) {
        pc.finite = false;
        pc.worst_index = k;
        pc.analytic = a;
        pc.numeric = num;
        continue;
      }
      const double rel = std::abs(a - num) / std::max({std::abs(a), std::abs(num), opt.floor});
      if (rel > pc.max_rel_error) {
        pc.max_rel_error = rel;
        pc.worst_index = k;
        pc.analytic = a;
        pc.numeric = num;
      }
    }
    rep.params.push_back(pc);
  }
  return rep;
}

}  // namespace emoe::nn
