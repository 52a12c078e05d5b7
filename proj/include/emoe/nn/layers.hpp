#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "emoe/common.hpp"
#include "emoe/nn/graph.hpp"
#include "emoe/nn/param.hpp"

namespace emoe::nn {

struct Linear {
  Parameter* w = nullptr;
  Parameter* b = nullptr;

  Linear() = default;
  Linear(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
    w = &ps.create(name + ".w", in, out);
    b = &ps.create(name + ".b", 1, out);
    init_glorot(*w, rng);
  }

  std::size_t in() const { return w->value.rows; }
  std::size_t out() const { return w->value.cols; }

  Var operator()(Var x) const { return linear(x, x.g->param(*w), x.g->param(*b)); }
};

struct LayerNorm {
  Parameter* gain = nullptr;
  Parameter* bias = nullptr;

  LayerNorm() = default;
  LayerNorm(ParamStore& ps, const std::string& name, std::size_t width) {
    gain = &ps.create(name + ".g", 1, width);
    bias = &ps.create(name + ".b", 1, width);
    init_const(*gain, 1.0);
  }

  Var operator()(Var x) const { return layer_norm(x, x.g->param(*gain), x.g->param(*bias)); }
};

/// Two-layer perceptron with a GELU in between.
struct Mlp {
  Linear fc1, fc2;

  Mlp() = default;
  Mlp(ParamStore& ps, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out, Rng& rng)
      : fc1(ps, name + ".fc1", in, hidden, rng), fc2(ps, name + ".fc2", hidden, out, rng) {}

  Var operator()(Var x) const { return fc2(gelu(fc1(x))); }
};

/// Multi-head attention with input and output projections.
struct MultiHeadAttention {
  Linear q, k, v, o;
  std::size_t heads = 1;

  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& ps, const std::string& name, std::size_t width, std::size_t h, Rng& rng)
      : q(ps, name + ".q", width, width, rng),
        k(ps, name + ".k", width, width, rng),
        v(ps, name + ".v", width, width, rng),
        o(ps, name + ".o", width, width, rng),
        heads(h) {
    if (h == 0 || width % h != 0)
      throw InvalidArgument("attention width " + std::to_string(width) + " not divisible by " + std::to_string(h));
  }

  Var operator()(Var queries, Var kv, const std::vector<char>& key_valid) const {
    return o(attention(q(queries), k(kv), v(kv), heads, key_valid));
  }
};

/// Attention, residual and layer norm.
struct AttentionSublayer {
  MultiHeadAttention attn;
  LayerNorm norm;

  AttentionSublayer() = default;
  AttentionSublayer(ParamStore& ps, const std::string& name, std::size_t width, std::size_t heads, Rng& rng)
      : attn(ps, name + ".attn", width, heads, rng), norm(ps, name + ".ln", width) {}

  Var operator()(Var x, Var kv, const std::vector<char>& key_valid) const {
    return norm(add(x, attn(x, kv, key_valid)));
  }
};

/// Feed-forward, residual and layer norm.
struct FeedForwardSublayer {
  Mlp ffn;
  LayerNorm norm;

  FeedForwardSublayer() = default;
  FeedForwardSublayer(ParamStore& ps, const std::string& name, std::size_t width, std::size_t hidden, Rng& rng)
      : ffn(ps, name, width, hidden, width, rng), norm(ps, name + ".ln", width) {}

  Var operator()(Var x) const { return norm(add(x, ffn(x))); }
};

/// Post-norm transformer block: attention sublayer then feed-forward sublayer.
/// Self-attention when kv is x, cross-attention otherwise.
struct AttentionBlock {
  AttentionSublayer attn;
  FeedForwardSublayer ff;

  AttentionBlock() = default;
  AttentionBlock(ParamStore& ps, const std::string& name, std::size_t width, std::size_t heads, std::size_t hidden,
                 Rng& rng)
      : attn(ps, name, width, heads, rng), ff(ps, name + ".ffn", width, hidden, rng) {}

  Var operator()(Var x, Var kv, const std::vector<char>& key_valid) const { return ff(attn(x, kv, key_valid)); }
};

/// MLP-Mixer block over stacks of `tokens` rows per entity, reduced to each
/// entity's last token.
struct Mixer {
  Parameter *tw1 = nullptr, *tb1 = nullptr, *tw2 = nullptr, *tb2 = nullptr;
  LayerNorm ln1;
  Mlp channel;
  LayerNorm ln2;
  std::size_t tokens = 0;

  Mixer() = default;
  Mixer(ParamStore& ps, const std::string& name, std::size_t t, std::size_t token_hidden, std::size_t width,
        std::size_t channel_hidden, Rng& rng)
      : tokens(t) {
    tw1 = &ps.create(name + ".token.fc1.w", t, token_hidden);
    tb1 = &ps.create(name + ".token.fc1.b", 1, token_hidden);
    tw2 = &ps.create(name + ".token.fc2.w", token_hidden, t);
    tb2 = &ps.create(name + ".token.fc2.b", 1, t);
    init_glorot(*tw1, rng);
    init_glorot(*tw2, rng);
    ln1 = LayerNorm(ps, name + ".ln1", width);
    channel = Mlp(ps, name + ".channel", width, channel_hidden, width, rng);
    ln2 = LayerNorm(ps, name + ".ln2", width);
  }

  /// x is (entities * tokens) x width; returns entities x width.
  Var operator()(Var x, std::size_t entities) const {
    Graph& g = *x.g;
    Var h = gelu(token_linear(x, entities, g.param(*tw1), g.param(*tb1)));
    Var y = ln1(add(x, token_linear(h, entities, g.param(*tw2), g.param(*tb2))));
    y = ln2(add(y, channel(y)));
    std::vector<std::size_t> last(entities);
    for (std::size_t e = 0; e < entities; ++e) last[e] = e * tokens + tokens - 1;
    return gather_rows(y, last);
  }
};

inline constexpr std::size_t kFourierBands = 16;

/// Angular frequencies for wavelengths log-spaced from 200 m down to 1 m.
inline std::vector<double> fourier_bands(std::size_t n = kFourierBands, double longest = 200.0, double shortest = 1.0) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
    const double lambda = longest * std::pow(shortest / longest, u);
    w[i] = 2.0 * kPi / lambda;
  }
  return w;
}

/// Appends sin and cos of every coordinate at every band to `out`.
inline void fourier_features(const double* coords, std::size_t n, const std::vector<double>& bands, double* out) {
  std::size_t k = 0;
  for (std::size_t c = 0; c < n; ++c)
    for (double w : bands) {
      out[k++] = std::sin(w * coords[c]);
      out[k++] = std::cos(w * coords[c]);
    }
}

/// Fourier position embedding: sin/cos features of the coordinate channels,
/// concatenated with optional extra channels, then a learned projection.
struct FoPE {
  std::vector<double> bands;
  std::size_t coords = 2;
  std::size_t extra = 0;
  Linear proj;

  FoPE() = default;
  FoPE(ParamStore& ps, const std::string& name, std::size_t n_coords, std::size_t n_extra, std::size_t width,
       Rng& rng)
      : bands(fourier_bands()),
        coords(n_coords),
        extra(n_extra),
        proj(ps, name + ".proj", 2 * n_coords * kFourierBands + n_extra, width, rng) {}

  std::size_t feature_width() const { return 2 * coords * bands.size() + extra; }

  /// Rows of raw inputs (coords then extras) to the pre-projection features.
  Mat features(const Mat& raw) const {
    if (raw.cols != coords + extra) throw InvalidArgument("fope: input width mismatch");
    Mat f(raw.rows, feature_width());
    for (std::size_t i = 0; i < raw.rows; ++i) {
      fourier_features(raw.row(i), coords, bands, f.row(i));
      for (std::size_t e = 0; e < extra; ++e) f(i, 2 * coords * bands.size() + e) = raw(i, coords + e);
    }
    return f;
  }

  Var operator()(Graph& g, const Mat& raw) const { return proj(g.constant(features(raw))); }
};

/// Ego encoder with state dropout: in training, the kinematic channels are
/// zeroed together with probability drop_prob per sample.
struct StateDropoutEncoder {
  Mlp mlp;
  std::vector<std::size_t> kinematic;  // input channels subject to dropout

  StateDropoutEncoder() = default;
  StateDropoutEncoder(ParamStore& ps, const std::string& name, std::size_t in, std::size_t width,
                      std::vector<std::size_t> kin, Rng& rng)
      : mlp(ps, name, in, width, width, rng), kinematic(std::move(kin)) {}

  /// Returns true when the kinematic channels were dropped.
  static bool apply_dropout(Mat& features, const std::vector<std::size_t>& channels, double drop_prob, Rng& rng) {
    if (drop_prob < 0.0 || drop_prob >= 1.0) throw InvalidArgument("sde: drop_prob must be in [0, 1)");
    if (!rng.bernoulli(drop_prob)) return false;
    for (std::size_t i = 0; i < features.rows; ++i)
      for (std::size_t c : channels) features(i, c) = 0.0;
    return true;
  }

  Var operator()(Graph& g, Mat features, bool training, double drop_prob, Rng& rng) const {
    if (training) apply_dropout(features, kinematic, drop_prob, rng);
    return mlp(g.constant(std::move(features)));
  }
};

}  // namespace emoe::nn
