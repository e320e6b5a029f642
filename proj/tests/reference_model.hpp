#pragma once

// Scalar, loop-by-loop forward pass used as an independent oracle for the
// fusion model. Deliberately naive: nested vectors, no shared helpers.

#include <cmath>
#include <numbers>
#include <vector>

#include "punc/model.hpp"

namespace punc::reference {

using Mat = std::vector<std::vector<double>>;

inline double at(const Matrix<double>& m, std::size_t r, std::size_t c) { return m(r, c); }

inline Mat linear(const Mat& x, const Matrix<double>& w, const Matrix<double>& b) {
  Mat y(x.size(), std::vector<double>(w.cols(), 0.0));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t o = 0; o < w.cols(); ++o) {
      double s = at(b, 0, o);
      for (std::size_t k = 0; k < w.rows(); ++k) s += x[i][k] * at(w, k, o);
      y[i][o] = s;
    }
  return y;
}

inline Mat layer_norm(const Mat& x, const Matrix<double>& g, const Matrix<double>& b) {
  Mat y = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = static_cast<double>(x[i].size());
    double mean = 0;
    for (double v : x[i]) mean += v;
    mean /= w;
    double var = 0;
    for (double v : x[i]) var += (v - mean) * (v - mean);
    var /= w;
    for (std::size_t j = 0; j < x[i].size(); ++j)
      y[i][j] = (x[i][j] - mean) / std::sqrt(var + 1e-5) * at(g, 0, j) + at(b, 0, j);
  }
  return y;
}

inline double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / std::numbers::pi) * (x + 0.044715 * x * x * x)));
}

inline void softmax(std::vector<double>& row) {
  double mx = row[0];
  for (double v : row) mx = std::max(mx, v);
  double s = 0;
  for (double& v : row) {
    v = std::exp(v - mx);
    s += v;
  }
  for (double& v : row) v /= s;
}

inline Mat block(const BlockParams<double>& p, std::size_t heads, const Mat& x) {
  const std::size_t n = x.size(), w = x[0].size(), dh = w / heads;
  const Mat a = layer_norm(x, p.ln1_gain, p.ln1_bias);
  const Mat q = linear(a, p.attention.wq, p.attention.bq);
  const Mat k = linear(a, p.attention.wk, p.attention.bk);
  const Mat v = linear(a, p.attention.wv, p.attention.bv);
  Mat ctx(n, std::vector<double>(w, 0.0));
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> s(n);
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0;
        for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) dot += q[i][c] * k[j][c];
        s[j] = dot / std::sqrt(static_cast<double>(dh));
      }
      softmax(s);
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) ctx[i][c] += s[j] * v[j][c];
    }
  }
  const Mat attn = linear(ctx, p.attention.wo, p.attention.bo);
  Mat x1 = x;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < w; ++j) x1[i][j] += attn[i][j];
  Mat hid = linear(layer_norm(x1, p.ln2_gain, p.ln2_bias), p.ffn_in_w, p.ffn_in_b);
  for (auto& row : hid)
    for (double& v2 : row) v2 = gelu(v2);
  const Mat f = linear(hid, p.ffn_out_w, p.ffn_out_b);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < w; ++j) x1[i][j] += f[i][j];
  return x1;
}

/// Encoder output H.
inline Mat encode(const ModelConfig& cfg, const FusionParams<double>& p, const std::vector<int>& tokens) {
  Mat x(tokens.size(), std::vector<double>(cfg.d));
  for (std::size_t i = 0; i < tokens.size(); ++i)
    for (std::size_t j = 0; j < cfg.d; ++j) {
      const double angle = static_cast<double>(i) / std::pow(10000.0, static_cast<double>(j - j % 2) / cfg.d);
      x[i][j] = at(p.token_embedding, static_cast<std::size_t>(tokens[i]), j) +
                (j % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  for (const auto& b : p.encoder) x = block(b, cfg.encoder_heads, x);
  return x;
}

/// Output probabilities Y.
inline Mat forward(const ModelConfig& cfg, const FusionParams<double>& p, const std::vector<int>& tokens,
                   const std::vector<int>& pos) {
  Mat c = encode(cfg, p, tokens);
  if (cfg.uses_pos())
    for (std::size_t i = 0; i < c.size(); ++i)
      for (std::size_t r = 0; r < cfg.b; ++r) c[i].push_back(at(p.pos_embedding, r, static_cast<std::size_t>(pos[i])));
  for (const auto& b : p.fusion) c = block(b, cfg.fusion_heads, c);
  Mat y = linear(c, p.output_w, p.output_b);
  for (auto& row : y) softmax(row);
  return y;
}

}  // namespace punc::reference
