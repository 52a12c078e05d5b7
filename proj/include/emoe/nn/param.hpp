#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "emoe/common.hpp"
#include "emoe/nn/tensor.hpp"

namespace emoe::nn {

struct Parameter {
  std::string name;
  Mat value;
  std::size_t index = 0;  // position in the owning store
};

/// Owns all parameters of a network in creation order. Names are unique.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;

  Parameter& create(const std::string& name, std::size_t rows, std::size_t cols) {
    if (by_name_.count(name)) throw InvalidArgument("duplicate parameter name " + name);
    auto p = std::make_unique<Parameter>();
    p->name = name;
    p->value = Mat(rows, cols);
    p->index = params_.size();
    by_name_[name] = p->index;
    params_.push_back(std::move(p));
    return *params_.back();
  }

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  Parameter* find(const std::string& name) {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : params_[it->second].get();
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t> by_name_;
};

/// One gradient matrix per parameter, index-aligned with a ParamStore.
struct GradBuffer {
  std::vector<Mat> g;

  explicit GradBuffer(const ParamStore& ps) {
    g.reserve(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) g.emplace_back(ps[i].value.rows, ps[i].value.cols);
  }

  void zero() {
    for (auto& m : g) std::fill(m.d.begin(), m.d.end(), 0.0);
  }

  void add(const GradBuffer& o) {
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t k = 0; k < g[i].d.size(); ++k) g[i].d[k] += o.g[i].d[k];
  }

  void scale(double s) {
    for (auto& m : g)
      for (double& v : m.d) v *= s;
  }
};

/// Glorot-uniform fill for weights.
inline void init_glorot(Parameter& p, Rng& rng) {
  const double lim = std::sqrt(6.0 / static_cast<double>(p.value.rows + p.value.cols));
  for (double& v : p.value.d) v = rng.uniform(-lim, lim);
}

inline void init_normal(Parameter& p, Rng& rng, double stddev) {
  for (double& v : p.value.d) v = stddev * rng.normal();
}

inline void init_const(Parameter& p, double c) {
  for (double& v : p.value.d) v = c;
}

}  // namespace emoe::nn
