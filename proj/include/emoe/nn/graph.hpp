#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <unordered_map>
#include <vector>

#include "emoe/common.hpp"
#include "emoe/nn/param.hpp"
#include "emoe/nn/tensor.hpp"

namespace emoe::nn {

class Graph;

/// Handle to a node of a Graph.
struct Var {
  Graph* g = nullptr;
  std::size_t id = 0;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so walking the
/// tape backwards visits every node after all of its consumers.
class Graph {
 public:
  using Backward = std::function<void(Graph&)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Mat m) { return push(std::move(m), false, "constant", {}); }

  /// Leaf bound to a parameter; repeated calls return the same node.
  Var param(const Parameter& p) {
    auto it = leaf_of_.find(&p);
    if (it != leaf_of_.end()) return {this, it->second};
    Node n;
    n.ext = &p.value;
    n.param = &p;
    n.needs_grad = true;
    nodes_.push_back(std::move(n));
    leaf_of_[&p] = nodes_.size() - 1;
    return {this, nodes_.size() - 1};
  }

  const Mat& value(Var v) const { return nodes_[v.id].val(); }
  const Mat& value(std::size_t id) const { return nodes_[id].val(); }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  /// Gradient accumulator of a node, allocated on first use.
  Mat& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Mat(n.val().rows, n.val().cols);
    return n.grad;
  }
  Mat& grad(Var v) { return grad(v.id); }
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }

  /// Appends an op node. `inputs` decide whether the node needs a gradient.
  Var push(Mat value, bool needs_grad, const char* op, Backward bw) {
    if (!all_finite(value)) throw NumericError(std::string("non-finite output of ") + op);
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    if (needs_grad) n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
  }

  /// Adds `seed` to the gradient of `v`; call before backward().
  void seed(Var v, const Mat& seed) {
    if (!seed.same_shape(value(v))) throw InvalidArgument("seed shape mismatch");
    if (!needs_grad(v.id)) return;
    Mat& g = grad(v.id);
    for (std::size_t i = 0; i < g.d.size(); ++i) g.d[i] += seed.d[i];
  }

  void backward() {
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.needs_grad || n.grad.empty() || !n.backward) continue;
      current_ = i;
      n.backward(*this);
    }
  }

  /// Index of the node whose backward is running.
  std::size_t current() const { return current_; }

  /// Adds parameter-leaf gradients into `out`.
  void accumulate(GradBuffer& out) const {
    for (const auto& [p, id] : leaf_of_) {
      const Node& n = nodes_[id];
      if (n.grad.empty()) continue;
      if (!all_finite(n.grad)) throw NumericError("non-finite gradient for " + p->name);
      Mat& dst = out.g[p->index];
      for (std::size_t k = 0; k < dst.d.size(); ++k) dst.d[k] += n.grad.d[k];
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    const Mat* ext = nullptr;
    Mat grad;
    Backward backward;
    const Parameter* param = nullptr;
    bool needs_grad = false;

    const Mat& val() const { return ext ? *ext : value; }
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> leaf_of_;
  std::size_t current_ = 0;
};

// ---------------------------------------------------------------- ops

namespace detail {

inline Graph& graph_of(std::initializer_list<Var> vs) {
  Graph* g = nullptr;
  for (Var v : vs) {
    if (!v.g) throw InvalidArgument("op on a null Var");
    if (g && g != v.g) throw InvalidArgument("op mixes graphs");
    g = v.g;
  }
  return *g;
}

inline void add_into(Mat& dst, const Mat& src) {
  for (std::size_t i = 0; i < dst.d.size(); ++i) dst.d[i] += src.d[i];
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

inline double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

/// y = x W + b, with W of shape in x out and b of shape 1 x out.
inline Var linear(Var x, Var w, Var b) {
  Graph& g = detail::graph_of({x, w, b});
  const Mat &X = g.value(x), &W = g.value(w), &B = g.value(b);
  if (X.cols != W.rows || B.rows != 1 || B.cols != W.cols)
    throw InvalidArgument("linear: shapes " + shape_str(X) + " " + shape_str(W) + " " + shape_str(B));
  Mat y(X.rows, W.cols);
  for (std::size_t i = 0; i < y.rows; ++i) std::copy(B.d.begin(), B.d.end(), y.row(i));
  kernel::gemm_nn(X, W, y);
  const bool ng = g.needs_grad(x.id) || g.needs_grad(w.id) || g.needs_grad(b.id);
  return g.push(std::move(y), ng, "linear", [x, w, b](Graph& g) {
    const Mat& dy = g.grad(g.current());
    if (g.needs_grad(x.id)) kernel::gemm_nt(dy, g.value(w), g.grad(x.id));
    if (g.needs_grad(w.id)) kernel::gemm_tn(g.value(x), dy, g.grad(w.id));
    if (g.needs_grad(b.id)) {
      Mat& db = g.grad(b.id);
      for (std::size_t i = 0; i < dy.rows; ++i)
        for (std::size_t j = 0; j < dy.cols; ++j) db.d[j] += dy(i, j);
    }
  });
}

inline Var add(Var a, Var b) {
  Graph& g = detail::graph_of({a, b});
  const Mat &A = g.value(a), &B = g.value(b);
  if (!A.same_shape(B)) throw InvalidArgument("add: shapes " + shape_str(A) + " " + shape_str(B));
  Mat y = A;
  detail::add_into(y, B);
  return g.push(std::move(y), g.needs_grad(a.id) || g.needs_grad(b.id), "add", [a, b](Graph& g) {
    const Mat& dy = g.grad(g.current());
    if (g.needs_grad(a.id)) detail::add_into(g.grad(a.id), dy);
    if (g.needs_grad(b.id)) detail::add_into(g.grad(b.id), dy);
  });
}

/// Adds a 1 x C row to every row of x.
inline Var add_row(Var x, Var row) {
  Graph& g = detail::graph_of({x, row});
  const Mat &X = g.value(x), &R = g.value(row);
  if (R.rows != 1 || R.cols != X.cols) throw InvalidArgument("add_row: shapes " + shape_str(X) + " " + shape_str(R));
  Mat y = X;
  for (std::size_t i = 0; i < y.rows; ++i)
    for (std::size_t j = 0; j < y.cols; ++j) y(i, j) += R.d[j];
  return g.push(std::move(y), g.needs_grad(x.id) || g.needs_grad(row.id), "add_row", [x, row](Graph& g) {
    const Mat& dy = g.grad(g.current());
    if (g.needs_grad(x.id)) detail::add_into(g.grad(x.id), dy);
    if (g.needs_grad(row.id)) {
      Mat& dr = g.grad(row.id);
      for (std::size_t i = 0; i < dy.rows; ++i)
        for (std::size_t j = 0; j < dy.cols; ++j) dr.d[j] += dy(i, j);
    }
  });
}

inline Var gelu(Var x) {
  Graph& g = detail::graph_of({x});
  Mat y = g.value(x);
  for (double& v : y.d) v = detail::gelu(v);
  return g.push(std::move(y), g.needs_grad(x.id), "gelu", [x](Graph& g) {
    const Mat& dy = g.grad(g.current());
    const Mat& X = g.value(x);
    Mat& dx = g.grad(x.id);
    for (std::size_t i = 0; i < dy.d.size(); ++i) dx.d[i] += dy.d[i] * detail::gelu_grad(X.d[i]);
  });
}

inline constexpr double kLayerNormEps = 1e-9;

/// Row-wise layer normalization with affine gain and bias (1 x C each).
inline Var layer_norm(Var x, Var gain, Var bias) {
  Graph& g = detail::graph_of({x, gain, bias});
  const Mat &X = g.value(x), &G = g.value(gain), &B = g.value(bias);
  if (G.rows != 1 || G.cols != X.cols || !G.same_shape(B)) throw InvalidArgument("layer_norm: shape mismatch");
  const std::size_t n = X.rows, c = X.cols;
  Mat xhat(n, c), y(n, c);
  std::vector<double> inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = X.row(i);
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += xi[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (xi[j] - mu) * (xi[j] - mu);
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat(i, j) = (xi[j] - mu) * inv_std[i];
      y(i, j) = G.d[j] * xhat(i, j) + B.d[j];
    }
  }
  const bool ng = g.needs_grad(x.id) || g.needs_grad(gain.id) || g.needs_grad(bias.id);
  return g.push(std::move(y), ng, "layer_norm",
                [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& g) {
                  const Mat& dy = g.grad(g.current());
                  const Mat& G = g.value(gain);
                  const std::size_t n = dy.rows, c = dy.cols;
                  if (g.needs_grad(gain.id) || g.needs_grad(bias.id)) {
                    Mat& dg = g.grad(gain.id);
                    Mat& db = g.grad(bias.id);
                    for (std::size_t i = 0; i < n; ++i)
                      for (std::size_t j = 0; j < c; ++j) {
                        dg.d[j] += dy(i, j) * xhat(i, j);
                        db.d[j] += dy(i, j);
                      }
                  }
                  if (!g.needs_grad(x.id)) return;
                  Mat& dx = g.grad(x.id);
                  std::vector<double> dxh(c);
                  for (std::size_t i = 0; i < n; ++i) {
                    double m1 = 0.0, m2 = 0.0;
                    for (std::size_t j = 0; j < c; ++j) {
                      dxh[j] = dy(i, j) * G.d[j];
                      m1 += dxh[j];
                      m2 += dxh[j] * xhat(i, j);
                    }
                    m1 /= static_cast<double>(c);
                    m2 /= static_cast<double>(c);
                    for (std::size_t j = 0; j < c; ++j) dx(i, j) += inv_std[i] * (dxh[j] - m1 - xhat(i, j) * m2);
                  }
                });
}

/// Multi-head scaled dot-product attention over already projected q, k, v.
/// `key_valid` (size = rows of k, empty means all valid) masks keys; a query
/// with no valid key gets a zero output row.
inline Var attention(Var q, Var k, Var v, std::size_t heads, const std::vector<char>& key_valid = {}) {
  Graph& g = detail::graph_of({q, k, v});
  const Mat &Q = g.value(q), &K = g.value(k), &V = g.value(v);
  const std::size_t nq = Q.rows, nk = K.rows, d = Q.cols;
  if (heads == 0 || d % heads != 0)
    throw InvalidArgument("attention: width " + std::to_string(d) + " not divisible by " + std::to_string(heads));
  if (K.cols != d || V.cols != d || V.rows != nk) throw InvalidArgument("attention: q/k/v shape mismatch");
  if (!key_valid.empty() && key_valid.size() != nk) throw InvalidArgument("attention: mask size mismatch");
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  bool any_valid = key_valid.empty();
  for (char c : key_valid) any_valid |= c != 0;

  // probs[h] is nq x nk; all zero when no key is valid.
  std::vector<Mat> probs(heads, Mat(nq, nk));
  Mat y(nq, d);
  if (any_valid) {
    std::vector<double> s(nk);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dh;
      for (std::size_t i = 0; i < nq; ++i) {
        double mx = -1e300;
        for (std::size_t j = 0; j < nk; ++j) {
          if (!key_valid.empty() && !key_valid[j]) continue;
          double acc = 0.0;
          for (std::size_t t = 0; t < dh; ++t) acc += Q(i, off + t) * K(j, off + t);
          s[j] = acc * scale;
          mx = std::max(mx, s[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < nk; ++j) {
          if (!key_valid.empty() && !key_valid[j]) continue;
          probs[h](i, j) = std::exp(s[j] - mx);
          z += probs[h](i, j);
        }
        for (std::size_t j = 0; j < nk; ++j) probs[h](i, j) /= z;
        for (std::size_t j = 0; j < nk; ++j) {
          const double p = probs[h](i, j);
          if (p == 0.0) continue;
          for (std::size_t t = 0; t < dh; ++t) y(i, off + t) += p * V(j, off + t);
        }
      }
    }
  }
  const bool ng = g.needs_grad(q.id) || g.needs_grad(k.id) || g.needs_grad(v.id);
  return g.push(std::move(y), ng && any_valid, "attention",
                [q, k, v, heads, dh, scale, probs = std::move(probs)](Graph& g) {
                  const Mat& dy = g.grad(g.current());
                  const Mat &Q = g.value(q), &K = g.value(k), &V = g.value(v);
                  const std::size_t nq = Q.rows, nk = K.rows;
                  const bool gq = g.needs_grad(q.id), gk = g.needs_grad(k.id), gv = g.needs_grad(v.id);
                  Mat* dq = gq ? &g.grad(q.id) : nullptr;
                  Mat* dk = gk ? &g.grad(k.id) : nullptr;
                  Mat* dv = gv ? &g.grad(v.id) : nullptr;
                  std::vector<double> dp(nk);
                  for (std::size_t h = 0; h < heads; ++h) {
                    const std::size_t off = h * dh;
                    const Mat& P = probs[h];
                    for (std::size_t i = 0; i < nq; ++i) {
                      double dot_pp = 0.0;
                      for (std::size_t j = 0; j < nk; ++j) {
                        const double p = P(i, j);
                        if (p == 0.0) {
                          dp[j] = 0.0;
                          continue;
                        }
                        double acc = 0.0;
                        for (std::size_t t = 0; t < dh; ++t) acc += dy(i, off + t) * V(j, off + t);
                        dp[j] = acc;
                        dot_pp += acc * p;
                        if (dv)
                          for (std::size_t t = 0; t < dh; ++t) (*dv)(j, off + t) += p * dy(i, off + t);
                      }
                      for (std::size_t j = 0; j < nk; ++j) {
                        const double p = P(i, j);
                        if (p == 0.0) continue;
                        const double ds = p * (dp[j] - dot_pp) * scale;
                        if (dq)
                          for (std::size_t t = 0; t < dh; ++t) (*dq)(i, off + t) += ds * K(j, off + t);
                        if (dk)
                          for (std::size_t t = 0; t < dh; ++t) (*dk)(j, off + t) += ds * Q(i, off + t);
                      }
                    }
                  }
                });
}

/// Stacks matrices with equal column counts.
inline Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidArgument("concat_rows: no inputs");
  Graph& g = *parts.front().g;
  const std::size_t c = g.value(parts.front()).cols;
  std::size_t r = 0;
  bool ng = false;
  for (Var p : parts) {
    if (p.g != &g || g.value(p).cols != c) throw InvalidArgument("concat_rows: mismatched inputs");
    r += g.value(p).rows;
    ng |= g.needs_grad(p.id);
  }
  Mat y(r, c);
  std::size_t at = 0;
  for (Var p : parts) {
    const Mat& m = g.value(p);
    std::copy(m.d.begin(), m.d.end(), y.d.begin() + static_cast<std::ptrdiff_t>(at * c));
    at += m.rows;
  }
  return g.push(std::move(y), ng, "concat_rows", [parts](Graph& g) {
    const Mat& dy = g.grad(g.current());
    std::size_t at = 0;
    for (Var p : parts) {
      const std::size_t n = g.value(p).size();
      if (g.needs_grad(p.id)) {
        Mat& dp = g.grad(p.id);
        for (std::size_t i = 0; i < n; ++i) dp.d[i] += dy.d[at + i];
      }
      at += n;
    }
  });
}

/// Selects rows by index (repeats allowed).
inline Var gather_rows(Var x, const std::vector<std::size_t>& idx) {
  Graph& g = detail::graph_of({x});
  const Mat& X = g.value(x);
  Mat y(idx.size(), X.cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= X.rows) throw InvalidArgument("gather_rows: index out of range");
    std::copy(X.row(idx[i]), X.row(idx[i]) + X.cols, y.row(i));
  }
  return g.push(std::move(y), g.needs_grad(x.id), "gather_rows", [x, idx](Graph& g) {
    const Mat& dy = g.grad(g.current());
    Mat& dx = g.grad(x.id);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < dy.cols; ++j) dx(idx[i], j) += dy(i, j);
  });
}

inline Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = begin + i;
  return gather_rows(x, idx);
}

/// Zeroes the rows whose flag is 0.
inline Var mask_rows(Var x, const std::vector<char>& keep) {
  Graph& g = detail::graph_of({x});
  Mat y = g.value(x);
  if (keep.size() != y.rows) throw InvalidArgument("mask_rows: mask size mismatch");
  for (std::size_t i = 0; i < y.rows; ++i)
    if (!keep[i]) std::fill(y.row(i), y.row(i) + y.cols, 0.0);
  return g.push(std::move(y), g.needs_grad(x.id), "mask_rows", [x, keep](Graph& g) {
    const Mat& dy = g.grad(g.current());
    Mat& dx = g.grad(x.id);
    for (std::size_t i = 0; i < dy.rows; ++i)
      if (keep[i])
        for (std::size_t j = 0; j < dy.cols; ++j) dx(i, j) += dy(i, j);
  });
}

/// Mean of the rows whose flag is set; zero row when none is.
inline Var masked_mean_rows(Var x, const std::vector<char>& keep) {
  Graph& g = detail::graph_of({x});
  const Mat& X = g.value(x);
  if (keep.size() != X.rows) throw InvalidArgument("masked_mean_rows: mask size mismatch");
  std::size_t n = 0;
  for (char c : keep) n += c != 0;
  const double inv = n ? 1.0 / static_cast<double>(n) : 0.0;
  Mat y(1, X.cols);
  for (std::size_t i = 0; i < X.rows; ++i)
    if (keep[i])
      for (std::size_t j = 0; j < X.cols; ++j) y.d[j] += X(i, j);
  for (double& v : y.d) v *= inv;
  return g.push(std::move(y), g.needs_grad(x.id), "masked_mean_rows", [x, keep, inv](Graph& g) {
    const Mat& dy = g.grad(g.current());
    Mat& dx = g.grad(x.id);
    for (std::size_t i = 0; i < dx.rows; ++i)
      if (keep[i])
        for (std::size_t j = 0; j < dx.cols; ++j) dx(i, j) += dy.d[j] * inv;
  });
}

/// Linear map along the token axis of a stack of n blocks of t_in rows:
/// out[b, j, :] = sum_i W[i, j] x[b, i, :] + bias[j], with W of shape
/// t_in x t_out and bias 1 x t_out.
inline Var token_linear(Var x, std::size_t blocks, Var w, Var bias) {
  Graph& g = detail::graph_of({x, w, bias});
  const Mat &X = g.value(x), &W = g.value(w), &B = g.value(bias);
  const std::size_t tin = W.rows, tout = W.cols, c = X.cols;
  if (X.rows != blocks * tin || B.rows != 1 || B.cols != tout) throw InvalidArgument("token_linear: shape mismatch");
  Mat y(blocks * tout, c);
  for (std::size_t b = 0; b < blocks; ++b)
    for (std::size_t j = 0; j < tout; ++j) {
      double* yj = y.row(b * tout + j);
      for (std::size_t k = 0; k < c; ++k) yj[k] = B.d[j];
      for (std::size_t i = 0; i < tin; ++i) {
        const double wij = W(i, j);
        const double* xi = X.row(b * tin + i);
        for (std::size_t k = 0; k < c; ++k) yj[k] += wij * xi[k];
      }
    }
  const bool ng = g.needs_grad(x.id) || g.needs_grad(w.id) || g.needs_grad(bias.id);
  return g.push(std::move(y), ng, "token_linear", [x, w, bias, blocks](Graph& g) {
    const Mat& dy = g.grad(g.current());
    const Mat &X = g.value(x), &W = g.value(w);
    const std::size_t tin = W.rows, tout = W.cols, c = X.cols;
    const bool gx = g.needs_grad(x.id), gw = g.needs_grad(w.id), gb = g.needs_grad(bias.id);
    for (std::size_t b = 0; b < blocks; ++b)
      for (std::size_t j = 0; j < tout; ++j) {
        const double* dyj = dy.row(b * tout + j);
        if (gb) {
          double s = 0.0;
          for (std::size_t k = 0; k < c; ++k) s += dyj[k];
          g.grad(bias.id).d[j] += s;
        }
        for (std::size_t i = 0; i < tin; ++i) {
          if (gw) {
            const double* xi = X.row(b * tin + i);
            double s = 0.0;
            for (std::size_t k = 0; k < c; ++k) s += dyj[k] * xi[k];
            g.grad(w.id)(i, j) += s;
          }
          if (gx) {
            const double wij = W(i, j);
            double* dxi = g.grad(x.id).row(b * tin + i);
            for (std::size_t k = 0; k < c; ++k) dxi[k] += wij * dyj[k];
          }
        }
      }
  });
}

/// y = scale * x + offset, with a constant offset of the same shape.
inline Var affine_const(Var x, double scale, const Mat& offset) {
  Graph& g = detail::graph_of({x});
  const Mat& X = g.value(x);
  if (!offset.same_shape(X)) throw InvalidArgument("affine_const: shape mismatch");
  Mat y(X.rows, X.cols);
  for (std::size_t i = 0; i < y.d.size(); ++i) y.d[i] = scale * X.d[i] + offset.d[i];
  return g.push(std::move(y), g.needs_grad(x.id), "affine_const", [x, scale](Graph& g) {
    const Mat& dy = g.grad(g.current());
    Mat& dx = g.grad(x.id);
    for (std::size_t i = 0; i < dy.d.size(); ++i) dx.d[i] += scale * dy.d[i];
  });
}

/// Maps raw head output (rows x 5T: x, y, c, s, v per step) to trajectories
/// (rows x 4T: x, y, heading, speed). Positions scale linearly, heading is
/// atan2(s, 1 + c) and speed is speed_scale * softplus(v).
inline Var trajectory_decode(Var raw, double pos_scale, double speed_scale) {
  Graph& g = detail::graph_of({raw});
  const Mat& R = g.value(raw);
  if (R.cols % 5 != 0) throw InvalidArgument("trajectory_decode: width not a multiple of 5");
  const std::size_t steps = R.cols / 5;
  Mat y(R.rows, 4 * steps);
  for (std::size_t i = 0; i < R.rows; ++i)
    for (std::size_t t = 0; t < steps; ++t) {
      const double* r = R.row(i) + 5 * t;
      double* o = y.row(i) + 4 * t;
      o[0] = pos_scale * r[0];
      o[1] = pos_scale * r[1];
      o[2] = std::atan2(r[3], 1.0 + r[2]);
      o[3] = speed_scale * detail::softplus(r[4]);
    }
  return g.push(std::move(y), g.needs_grad(raw.id), "trajectory_decode", [raw, pos_scale, speed_scale](Graph& g) {
    const Mat& dy = g.grad(g.current());
    const Mat& R = g.value(raw);
    Mat& dr = g.grad(raw.id);
    const std::size_t steps = R.cols / 5;
    for (std::size_t i = 0; i < R.rows; ++i)
      for (std::size_t t = 0; t < steps; ++t) {
        const double* r = R.row(i) + 5 * t;
        const double* d = dy.row(i) + 4 * t;
        double* o = dr.row(i) + 5 * t;
        o[0] += pos_scale * d[0];
        o[1] += pos_scale * d[1];
        const double c = 1.0 + r[2], s = r[3], n2 = c * c + s * s;
        if (n2 > 0.0) {
          o[2] += d[2] * (-s / n2);
          o[3] += d[2] * (c / n2);
        }
        o[4] += d[3] * speed_scale * detail::sigmoid(r[4]);
      }
  });
}

}  // namespace emoe::nn
