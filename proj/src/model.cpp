#include "punc/model.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "punc/binary_io.hpp"
#include "punc/sampler.hpp"

namespace punc {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kGeluC = 0.044715;

std::size_t parse_count(const std::map<std::string, std::string>& kv, const std::string& key,
                        std::size_t fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : static_cast<std::size_t>(std::stoull(it->second));
}

}  // namespace

std::string_view to_string(PosSource s) {
  switch (s) {
    case PosSource::None: return "none";
    case PosSource::Random: return "random";
    case PosSource::Tagger: return "tagger";
  }
  return "?";
}

std::string_view to_string(LossMask m) {
  return m == LossMask::None ? "none" : "position_mask";
}

std::string_view to_string(NontailPos p) { return p == NontailPos::Copy ? "copy" : "x"; }

std::string_view to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::Encoder: return "encoder";
    case ParamGroup::PosEmbedding: return "pos_embedding";
    case ParamGroup::Fusion: return "fusion";
    case ParamGroup::Output: return "output";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// ModelConfig

std::vector<std::string> ModelConfig::validate() const {
  std::vector<std::string> errors;
  if (vocab_size < 3) errors.push_back("vocab_size must be at least 3 (specials)");
  if (d == 0) errors.push_back("d must be positive");
  if (uses_pos() && b == 0) errors.push_back("b must be positive when POS input is used");
  if (uses_pos() && e == 0) errors.push_back("e must be positive when POS input is used");
  if (encoder_heads == 0 || d % encoder_heads != 0)
    errors.push_back("encoder width d=" + std::to_string(d) + " must be divisible by encoder_heads=" +
                     std::to_string(encoder_heads));
  if (fusion_layers > 0 && (fusion_heads == 0 || fusion_width() % fusion_heads != 0))
    errors.push_back("fusion input width d+b=" + std::to_string(fusion_width()) +
                     " must be divisible by fusion_heads=" + std::to_string(fusion_heads));
  if (encoder_ffn_dim == 0) errors.push_back("encoder_ffn_dim must be positive");
  if (fusion_ffn_dim == 0) errors.push_back("fusion_ffn_dim must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) errors.push_back("dropout must lie in [0, 1)");
  if (seq_len < 2) errors.push_back("seq_len must be at least 2");
  return errors;
}

std::map<std::string, std::string> ModelConfig::to_map() const {
  std::ostringstream dropout_text;
  dropout_text.precision(17);
  dropout_text << dropout;
  return {
      {"vocab_size", std::to_string(vocab_size)},
      {"d", std::to_string(d)},
      {"b", std::to_string(b)},
      {"e", std::to_string(e)},
      {"num_encoder_layers", std::to_string(num_encoder_layers)},
      {"encoder_heads", std::to_string(encoder_heads)},
      {"encoder_ffn_dim", std::to_string(encoder_ffn_dim)},
      {"fusion_layers", std::to_string(fusion_layers)},
      {"fusion_heads", std::to_string(fusion_heads)},
      {"fusion_ffn_dim", std::to_string(fusion_ffn_dim)},
      {"dropout", dropout_text.str()},
      {"seq_len", std::to_string(seq_len)},
      {"pos_source", std::string(to_string(pos_source))},
      {"loss_mask", std::string(to_string(loss_mask))},
      {"nontail_pos", std::string(to_string(nontail_pos))},
      {"init_seed", std::to_string(init_seed)},
  };
}

ModelConfig ModelConfig::from_map(const std::map<std::string, std::string>& kv) {
  ModelConfig c;
  c.vocab_size = parse_count(kv, "vocab_size", c.vocab_size);
  c.d = parse_count(kv, "d", c.d);
  c.b = parse_count(kv, "b", c.b);
  c.e = parse_count(kv, "e", c.e);
  c.num_encoder_layers = parse_count(kv, "num_encoder_layers", c.num_encoder_layers);
  c.encoder_heads = parse_count(kv, "encoder_heads", c.encoder_heads);
  c.encoder_ffn_dim = parse_count(kv, "encoder_ffn_dim", c.encoder_ffn_dim);
  c.fusion_layers = parse_count(kv, "fusion_layers", c.fusion_layers);
  c.fusion_heads = parse_count(kv, "fusion_heads", c.fusion_heads);
  c.fusion_ffn_dim = parse_count(kv, "fusion_ffn_dim", c.fusion_ffn_dim);
  c.seq_len = parse_count(kv, "seq_len", c.seq_len);
  c.init_seed = parse_count(kv, "init_seed", c.init_seed);
  if (auto it = kv.find("dropout"); it != kv.end()) c.dropout = std::stod(it->second);
  if (auto it = kv.find("pos_source"); it != kv.end()) {
    if (it->second == "none") c.pos_source = PosSource::None;
    else if (it->second == "random") c.pos_source = PosSource::Random;
    else if (it->second == "tagger") c.pos_source = PosSource::Tagger;
    else throw std::invalid_argument("pos_source must be none|random|tagger, got " + it->second);
  }
  if (auto it = kv.find("loss_mask"); it != kv.end()) {
    if (it->second == "none") c.loss_mask = LossMask::None;
    else if (it->second == "position_mask") c.loss_mask = LossMask::PositionMask;
    else throw std::invalid_argument("loss_mask must be none|position_mask, got " + it->second);
  }
  if (auto it = kv.find("nontail_pos"); it != kv.end()) {
    if (it->second == "copy") c.nontail_pos = NontailPos::Copy;
    else if (it->second == "x") c.nontail_pos = NontailPos::X;
    else throw std::invalid_argument("nontail_pos must be copy|x, got " + it->second);
  }
  return c;
}

std::vector<std::uint8_t> loss_positions(LossMask mask, std::span<const std::uint8_t> position_mask) {
  if (mask == LossMask::None) return std::vector<std::uint8_t>(position_mask.size(), 1);
  return {position_mask.begin(), position_mask.end()};
}

// ---------------------------------------------------------------------------
// FusionParams

namespace {

template <typename T, typename P, typename Out>
void collect_block(P& blk, const std::string& prefix, ParamGroup g, Out& out) {
  out.push_back({prefix + ".ln1_gain", g, &blk.ln1_gain});
  out.push_back({prefix + ".ln1_bias", g, &blk.ln1_bias});
  out.push_back({prefix + ".attn.wq", g, &blk.attention.wq});
  out.push_back({prefix + ".attn.bq", g, &blk.attention.bq});
  out.push_back({prefix + ".attn.wk", g, &blk.attention.wk});
  out.push_back({prefix + ".attn.bk", g, &blk.attention.bk});
  out.push_back({prefix + ".attn.wv", g, &blk.attention.wv});
  out.push_back({prefix + ".attn.bv", g, &blk.attention.bv});
  out.push_back({prefix + ".attn.wo", g, &blk.attention.wo});
  out.push_back({prefix + ".attn.bo", g, &blk.attention.bo});
  out.push_back({prefix + ".ln2_gain", g, &blk.ln2_gain});
  out.push_back({prefix + ".ln2_bias", g, &blk.ln2_bias});
  out.push_back({prefix + ".ffn_in_w", g, &blk.ffn_in_w});
  out.push_back({prefix + ".ffn_in_b", g, &blk.ffn_in_b});
  out.push_back({prefix + ".ffn_out_w", g, &blk.ffn_out_w});
  out.push_back({prefix + ".ffn_out_b", g, &blk.ffn_out_b});
}

template <typename T, typename Self, typename Out>
void collect_all(Self& p, Out& out) {
  out.push_back({"token_embedding", ParamGroup::Encoder, &p.token_embedding});
  for (std::size_t l = 0; l < p.encoder.size(); ++l)
    collect_block<T>(p.encoder[l], "encoder." + std::to_string(l), ParamGroup::Encoder, out);
  if (p.pos_embedding.size() > 0)
    out.push_back({"pos_embedding", ParamGroup::PosEmbedding, &p.pos_embedding});
  for (std::size_t l = 0; l < p.fusion.size(); ++l)
    collect_block<T>(p.fusion[l], "fusion." + std::to_string(l), ParamGroup::Fusion, out);
  out.push_back({"output_w", ParamGroup::Output, &p.output_w});
  out.push_back({"output_b", ParamGroup::Output, &p.output_b});
}

}  // namespace

template <typename T>
std::vector<NamedTensor<T>> FusionParams<T>::tensors() {
  std::vector<NamedTensor<T>> out;
  collect_all<T>(*this, out);
  return out;
}

template <typename T>
std::vector<ConstNamedTensor<T>> FusionParams<T>::tensors() const {
  std::vector<ConstNamedTensor<T>> out;
  collect_all<T>(*this, out);
  return out;
}

template <typename T>
FusionParams<T> FusionParams<T>::zeros_like() const {
  FusionParams<T> z = *this;
  for (auto& t : z.tensors()) t.tensor->fill(T(0));
  return z;
}

template <typename T>
void FusionParams<T>::add(const FusionParams& other) {
  auto mine = tensors();
  auto theirs = other.tensors();
  for (std::size_t i = 0; i < mine.size(); ++i) linalg::add_inplace(*mine[i].tensor, *theirs[i].tensor);
}

template <typename T>
void FusionParams<T>::scale(T factor) {
  for (auto& t : tensors())
    for (auto& v : t.tensor->flat()) v *= factor;
}

template <typename T>
std::size_t FusionParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.tensor->size();
  return n;
}

// ---------------------------------------------------------------------------
// Building blocks

template <typename T>
Matrix<T> sinusoidal_positions(std::size_t n, std::size_t d) {
  Matrix<T> pe(n, d);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t i = 0; i < d; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
      const double angle = static_cast<double>(p) * freq;
      pe(p, i) = static_cast<T>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return pe;
}

namespace {

template <typename T>
Matrix<T> layer_norm(const Matrix<T>& x, const Matrix<T>& gain, const Matrix<T>& bias,
                     LayerNormCache<T>* cache) {
  const std::size_t n = x.rows(), w = x.cols();
  Matrix<T> y(n, w);
  if (cache) {
    cache->xhat = Matrix<T>(n, w);
    cache->rstd.assign(n, T(0));
  }
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < w; ++j) mean += x(i, j);
    mean /= static_cast<double>(w);
    double var = 0.0;
    for (std::size_t j = 0; j < w; ++j) {
      const double c = x(i, j) - mean;
      var += c * c;
    }
    var /= static_cast<double>(w);
    const T rstd = static_cast<T>(1.0 / std::sqrt(var + kLayerNormEps));
    for (std::size_t j = 0; j < w; ++j) {
      const T xh = static_cast<T>(x(i, j) - mean) * rstd;
      if (cache) cache->xhat(i, j) = xh;
      y(i, j) = xh * gain[j] + bias[j];
    }
    if (cache) cache->rstd[i] = rstd;
  }
  return y;
}

template <typename T>
Matrix<T> layer_norm_backward(const Matrix<T>& dy, const Matrix<T>& gain, const LayerNormCache<T>& cache,
                              Matrix<T>& dgain, Matrix<T>& dbias) {
  const std::size_t n = dy.rows(), w = dy.cols();
  Matrix<T> dx(n, w);
  std::vector<T> dxhat(w);
  for (std::size_t i = 0; i < n; ++i) {
    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
    for (std::size_t j = 0; j < w; ++j) {
      const T g = dy(i, j);
      dgain[j] += g * cache.xhat(i, j);
      dbias[j] += g;
      dxhat[j] = g * gain[j];
      mean_dxhat += dxhat[j];
      mean_dxhat_xhat += static_cast<double>(dxhat[j]) * cache.xhat(i, j);
    }
    mean_dxhat /= static_cast<double>(w);
    mean_dxhat_xhat /= static_cast<double>(w);
    for (std::size_t j = 0; j < w; ++j)
      dx(i, j) = cache.rstd[i] * static_cast<T>(dxhat[j] - mean_dxhat - cache.xhat(i, j) * mean_dxhat_xhat);
  }
  return dx;
}

template <typename T>
T gelu(T x) {
  const double k = std::sqrt(2.0 / std::numbers::pi);
  const double xd = x;
  return static_cast<T>(0.5 * xd * (1.0 + std::tanh(k * (xd + kGeluC * xd * xd * xd))));
}

template <typename T>
T gelu_grad(T x) {
  const double k = std::sqrt(2.0 / std::numbers::pi);
  const double xd = x;
  const double t = std::tanh(k * (xd + kGeluC * xd * xd * xd));
  return static_cast<T>(0.5 * (1.0 + t) + 0.5 * xd * (1.0 - t * t) * k * (1.0 + 3.0 * kGeluC * xd * xd));
}

/// Scaled keep mask (0 or 1/(1-p)), derived from a counter stream.
template <typename T>
Matrix<T> dropout_mask(std::size_t rows, std::size_t cols, double p, std::uint64_t stream) {
  Matrix<T> m(rows, cols);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double u = static_cast<double>(mix64(stream + i * 0x9e3779b97f4a7c15ULL) >> 11) * 0x1.0p-53;
    m[i] = u >= p ? keep_scale : T(0);
  }
  return m;
}

template <typename T>
Matrix<T> block_forward(const BlockParams<T>& p, std::size_t heads, const Matrix<T>& x,
                        double dropout, std::uint64_t site, BlockCache<T>* cache) {
  const std::size_t n = x.rows(), w = x.cols(), dh = w / heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

  LayerNormCache<T> ln1;
  Matrix<T> a = layer_norm(x, p.ln1_gain, p.ln1_bias, cache ? &ln1 : nullptr);
  Matrix<T> q = linalg::matmul(a, p.attention.wq, &p.attention.bq);
  Matrix<T> k = linalg::matmul(a, p.attention.wk, &p.attention.bk);
  Matrix<T> v = linalg::matmul(a, p.attention.wv, &p.attention.bv);

  Matrix<T> context(n, w);
  std::vector<Matrix<T>> probs;
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    Matrix<T> s(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        T acc = T(0);
        for (std::size_t c = 0; c < dh; ++c) acc += q(i, off + c) * k(j, off + c);
        s(i, j) = acc * scale;
      }
    }
    linalg::softmax_rows(s);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const T pij = s(i, j);
        for (std::size_t c = 0; c < dh; ++c) context(i, off + c) += pij * v(j, off + c);
      }
    }
    if (cache) probs.push_back(std::move(s));
  }
  Matrix<T> attn = linalg::matmul(context, p.attention.wo, &p.attention.bo);

  Matrix<T> drop1, drop2;
  if (dropout > 0.0) {
    drop1 = dropout_mask<T>(n, w, dropout, counter_hash({site, 1}));
    for (std::size_t i = 0; i < attn.size(); ++i) attn[i] *= drop1[i];
  }
  Matrix<T> x1 = x;
  linalg::add_inplace(x1, attn);

  LayerNormCache<T> ln2;
  Matrix<T> f = layer_norm(x1, p.ln2_gain, p.ln2_bias, cache ? &ln2 : nullptr);
  Matrix<T> pre = linalg::matmul(f, p.ffn_in_w, &p.ffn_in_b);
  Matrix<T> act(pre.rows(), pre.cols());
  for (std::size_t i = 0; i < pre.size(); ++i) act[i] = gelu(pre[i]);
  Matrix<T> g = linalg::matmul(act, p.ffn_out_w, &p.ffn_out_b);
  if (dropout > 0.0) {
    drop2 = dropout_mask<T>(n, w, dropout, counter_hash({site, 2}));
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= drop2[i];
  }
  Matrix<T> out = x1;
  linalg::add_inplace(out, g);

  if (cache) {
    cache->input = x;
    cache->ln1 = std::move(ln1);
    cache->normed1 = std::move(a);
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
    cache->context = std::move(context);
    cache->drop1 = std::move(drop1);
    cache->x1 = std::move(x1);
    cache->ln2 = std::move(ln2);
    cache->normed2 = std::move(f);
    cache->pre_act = std::move(pre);
    cache->act = std::move(act);
    cache->drop2 = std::move(drop2);
  }
  return out;
}

/// Accumulates parameter gradients into `g` and returns d(input).
template <typename T>
Matrix<T> block_backward(const BlockParams<T>& p, BlockParams<T>& g, std::size_t heads,
                         const BlockCache<T>& c, const Matrix<T>& dout) {
  const std::size_t n = dout.rows(), w = dout.cols(), dh = w / heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

  // FFN branch: out = x1 + drop2 * (gelu(LN2(x1) W1 + b1) W2 + b2)
  Matrix<T> dg = dout;
  if (c.drop2.size() > 0)
    for (std::size_t i = 0; i < dg.size(); ++i) dg[i] *= c.drop2[i];
  linalg::add_matmul_at_b(g.ffn_out_w, c.act, dg);
  linalg::add_column_sums(g.ffn_out_b, dg);
  Matrix<T> dpre = linalg::matmul_a_bt(dg, p.ffn_out_w);
  for (std::size_t i = 0; i < dpre.size(); ++i) dpre[i] *= gelu_grad(c.pre_act[i]);
  linalg::add_matmul_at_b(g.ffn_in_w, c.normed2, dpre);
  linalg::add_column_sums(g.ffn_in_b, dpre);
  Matrix<T> df = linalg::matmul_a_bt(dpre, p.ffn_in_w);
  Matrix<T> dx1 = layer_norm_backward(df, p.ln2_gain, c.ln2, g.ln2_gain, g.ln2_bias);
  linalg::add_inplace(dx1, dout);

  // Attention branch: x1 = x + drop1 * (softmax(QK^T/sqrt(dh)) V Wo + bo)
  Matrix<T> dattn = dx1;
  if (c.drop1.size() > 0)
    for (std::size_t i = 0; i < dattn.size(); ++i) dattn[i] *= c.drop1[i];
  linalg::add_matmul_at_b(g.attention.wo, c.context, dattn);
  linalg::add_column_sums(g.attention.bo, dattn);
  Matrix<T> dcontext = linalg::matmul_a_bt(dattn, p.attention.wo);

  Matrix<T> dq(n, w), dk(n, w), dv(n, w);
  Matrix<T> dp(n, n);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    const Matrix<T>& P = c.probs[h];
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        T acc = T(0);
        for (std::size_t cc = 0; cc < dh; ++cc) acc += dcontext(i, off + cc) * c.v(j, off + cc);
        dp(i, j) = acc;
        const T pij = P(i, j);
        for (std::size_t cc = 0; cc < dh; ++cc) dv(j, off + cc) += pij * dcontext(i, off + cc);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      T dot = T(0);
      for (std::size_t j = 0; j < n; ++j) dot += dp(i, j) * P(i, j);
      for (std::size_t j = 0; j < n; ++j) {
        const T ds = P(i, j) * (dp(i, j) - dot) * scale;
        if (ds == T(0)) continue;
        for (std::size_t cc = 0; cc < dh; ++cc) {
          dq(i, off + cc) += ds * c.k(j, off + cc);
          dk(j, off + cc) += ds * c.q(i, off + cc);
        }
      }
    }
  }
  linalg::add_matmul_at_b(g.attention.wq, c.normed1, dq);
  linalg::add_column_sums(g.attention.bq, dq);
  linalg::add_matmul_at_b(g.attention.wk, c.normed1, dk);
  linalg::add_column_sums(g.attention.bk, dk);
  linalg::add_matmul_at_b(g.attention.wv, c.normed1, dv);
  linalg::add_column_sums(g.attention.bv, dv);
  Matrix<T> da = linalg::matmul_a_bt(dq, p.attention.wq);
  linalg::add_inplace(da, linalg::matmul_a_bt(dk, p.attention.wk));
  linalg::add_inplace(da, linalg::matmul_a_bt(dv, p.attention.wv));
  Matrix<T> dx = layer_norm_backward(da, p.ln1_gain, c.ln1, g.ln1_gain, g.ln1_bias);
  linalg::add_inplace(dx, dx1);
  return dx;
}

template <typename T>
BlockParams<T> init_block(std::size_t width, std::size_t ffn, std::mt19937_64& rng) {
  BlockParams<T> p;
  const double s_in = 1.0 / std::sqrt(static_cast<double>(width));
  const double s_ffn = 1.0 / std::sqrt(static_cast<double>(ffn));
  p.ln1_gain = Matrix<T>(1, width, T(1));
  p.ln1_bias = Matrix<T>(1, width);
  for (Matrix<T>* m : {&p.attention.wq, &p.attention.wk, &p.attention.wv, &p.attention.wo}) {
    *m = Matrix<T>(width, width);
    fill_normal(*m, s_in, rng);
  }
  for (Matrix<T>* m : {&p.attention.bq, &p.attention.bk, &p.attention.bv, &p.attention.bo})
    *m = Matrix<T>(1, width);
  p.ln2_gain = Matrix<T>(1, width, T(1));
  p.ln2_bias = Matrix<T>(1, width);
  p.ffn_in_w = Matrix<T>(width, ffn);
  fill_normal(p.ffn_in_w, s_in, rng);
  p.ffn_in_b = Matrix<T>(1, ffn);
  p.ffn_out_w = Matrix<T>(ffn, width);
  fill_normal(p.ffn_out_w, s_ffn, rng);
  p.ffn_out_b = Matrix<T>(1, width);
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// FusionModel

template <typename T>
FusionModel<T>::FusionModel(ModelConfig config) : config_(std::move(config)) {
  if (auto errors = config_.validate(); !errors.empty()) {
    std::string msg = "invalid model config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw std::invalid_argument(msg);
  }
  std::mt19937_64 rng(config_.init_seed);
  params_.token_embedding = Matrix<T>(config_.vocab_size, config_.d);
  fill_normal(params_.token_embedding, 1.0, rng);
  for (std::size_t l = 0; l < config_.num_encoder_layers; ++l)
    params_.encoder.push_back(init_block<T>(config_.d, config_.encoder_ffn_dim, rng));
  if (config_.uses_pos()) {
    params_.pos_embedding = Matrix<T>(config_.b, config_.e);
    fill_normal(params_.pos_embedding, 1.0 / std::sqrt(static_cast<double>(config_.b)), rng);
  }
  const std::size_t width = config_.fusion_width();
  for (std::size_t l = 0; l < config_.fusion_layers; ++l)
    params_.fusion.push_back(init_block<T>(width, config_.fusion_ffn_dim, rng));
  params_.output_w = Matrix<T>(width, ModelConfig::num_labels);
  fill_normal(params_.output_w, 1.0 / std::sqrt(static_cast<double>(width)), rng);
  params_.output_b = Matrix<T>(1, ModelConfig::num_labels);
}

template <typename T>
void FusionModel<T>::set_pos_embedding(const Matrix<T>& W) {
  if (!config_.uses_pos()) throw DimensionMismatch("model built without POS input has no W");
  if (W.rows() != config_.b || W.cols() != config_.e)
    throw DimensionMismatch("POS embedding is " + std::to_string(W.rows()) + "x" +
                            std::to_string(W.cols()) + ", model expects b x e = " +
                            std::to_string(config_.b) + "x" + std::to_string(config_.e));
  params_.pos_embedding = W;
}

namespace {

template <typename T>
Matrix<T> run_encoder(const ModelConfig& cfg, const FusionParams<T>& p, std::span<const int> tokens,
                      const ForwardOptions& opts, std::vector<BlockCache<T>>* caches) {
  const std::size_t n = tokens.size();
  if (n == 0) throw std::invalid_argument("encode: empty token sequence");
  Matrix<T> x = sinusoidal_positions<T>(n, cfg.d);
  for (std::size_t i = 0; i < n; ++i) {
    if (tokens[i] < 0 || static_cast<std::size_t>(tokens[i]) >= cfg.vocab_size)
      throw IdOutOfRange("token id " + std::to_string(tokens[i]) + " outside vocabulary of size " +
                         std::to_string(cfg.vocab_size));
    const auto emb = p.token_embedding.row(static_cast<std::size_t>(tokens[i]));
    for (std::size_t j = 0; j < cfg.d; ++j) x(i, j) += emb[j];
  }
  const double drop = opts.mode == Mode::Train ? cfg.dropout : 0.0;
  if (caches) caches->resize(p.encoder.size());
  for (std::size_t l = 0; l < p.encoder.size(); ++l) {
    x = block_forward(p.encoder[l], cfg.encoder_heads, x, drop,
                      counter_hash({opts.dropout_stream, 0, l}), caches ? &(*caches)[l] : nullptr);
  }
  return x;
}

}  // namespace

template <typename T>
Matrix<T> FusionModel<T>::encode(std::span<const int> tokens, const ForwardOptions& opts) const {
  return run_encoder<T>(config_, params_, tokens, opts, nullptr);
}

template <typename T>
ForwardTrace<T> FusionModel<T>::forward(std::span<const int> tokens, std::span<const int> pos_ids,
                                        const ForwardOptions& opts) const {
  if (config_.uses_pos() && pos_ids.size() != tokens.size())
    throw std::invalid_argument("forward: " + std::to_string(tokens.size()) + " tokens but " +
                                std::to_string(pos_ids.size()) + " POS ids");
  ForwardTrace<T> t;
  t.mode = opts.mode;
  t.tokens.assign(tokens.begin(), tokens.end());
  t.pos_ids.assign(pos_ids.begin(), pos_ids.end());
  t.H = run_encoder(config_, params_, tokens, opts, &t.encoder_caches);
  const std::size_t n = tokens.size();
  if (config_.uses_pos()) {
    t.E = pos_embed(params_.pos_embedding, pos_ids);
    t.C = Matrix<T>(n, config_.d + config_.b);
    for (std::size_t i = 0; i < n; ++i) {
      auto row = t.C.row(i);
      std::copy(t.H.row(i).begin(), t.H.row(i).end(), row.begin());
      std::copy(t.E.row(i).begin(), t.E.row(i).end(), row.begin() + static_cast<std::ptrdiff_t>(config_.d));
    }
  } else {
    t.C = t.H;
  }
  const double drop = opts.mode == Mode::Train ? config_.dropout : 0.0;
  Matrix<T> z = t.C;
  t.fusion_caches.resize(params_.fusion.size());
  for (std::size_t l = 0; l < params_.fusion.size(); ++l)
    z = block_forward(params_.fusion[l], config_.fusion_heads, z, drop,
                      counter_hash({opts.dropout_stream, 1, l}), &t.fusion_caches[l]);
  t.Z = std::move(z);
  t.Y = linalg::matmul(t.Z, params_.output_w, &params_.output_b);
  linalg::softmax_rows(t.Y);
  return t;
}

template <typename T>
double FusionModel<T>::loss_sum(const ForwardTrace<T>& trace, std::span<const PunctLabel> labels,
                                std::span<const std::uint8_t> include) {
  if (labels.size() != trace.length())
    throw std::invalid_argument("loss: label count differs from sequence length");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!include.empty() && !include[i]) continue;
    const double p = trace.Y(i, static_cast<std::size_t>(label_id(labels[i])));
    total -= std::log(std::max(p, 1e-300));
  }
  return total;
}

template <typename T>
LossAndGrads<T> FusionModel<T>::loss_and_grads(const ForwardTrace<T>& trace,
                                               std::span<const PunctLabel> labels,
                                               std::span<const std::uint8_t> include) const {
  const std::size_t n = trace.length();
  if (!include.empty() && include.size() != n)
    throw std::invalid_argument("loss: include mask length differs from sequence length");
  LossAndGrads<T> out;
  out.grads = params_.zeros_like();
  for (std::size_t i = 0; i < n; ++i)
    if (include.empty() || include[i]) ++out.positions;
  if (out.positions == 0) return out;
  out.loss = loss_sum(trace, labels, include) / static_cast<double>(out.positions);

  const T inv = static_cast<T>(1.0 / static_cast<double>(out.positions));
  Matrix<T> dlogits(n, ModelConfig::num_labels);
  for (std::size_t i = 0; i < n; ++i) {
    if (!include.empty() && !include[i]) continue;
    for (std::size_t c = 0; c < ModelConfig::num_labels; ++c) dlogits(i, c) = trace.Y(i, c) * inv;
    dlogits(i, static_cast<std::size_t>(label_id(labels[i]))) -= inv;
  }
  auto& g = out.grads;
  linalg::add_matmul_at_b(g.output_w, trace.Z, dlogits);
  linalg::add_column_sums(g.output_b, dlogits);
  Matrix<T> dz = linalg::matmul_a_bt(dlogits, params_.output_w);
  for (std::size_t l = params_.fusion.size(); l-- > 0;)
    dz = block_backward(params_.fusion[l], g.fusion[l], config_.fusion_heads, trace.fusion_caches[l], dz);

  Matrix<T> dh(n, config_.d);
  if (config_.uses_pos()) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < config_.d; ++j) dh(i, j) = dz(i, j);
      const auto tag = static_cast<std::size_t>(trace.pos_ids[i]);
      for (std::size_t r = 0; r < config_.b; ++r) g.pos_embedding(r, tag) += dz(i, config_.d + r);
    }
  } else {
    dh = std::move(dz);
  }
  for (std::size_t l = params_.encoder.size(); l-- > 0;)
    dh = block_backward(params_.encoder[l], g.encoder[l], config_.encoder_heads, trace.encoder_caches[l], dh);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = g.token_embedding.row(static_cast<std::size_t>(trace.tokens[i]));
    for (std::size_t j = 0; j < config_.d; ++j) row[j] += dh(i, j);
  }
  return out;
}

template <typename T>
std::vector<PunctLabel> ForwardTrace<T>::argmax() const {
  std::vector<PunctLabel> out(Y.rows());
  for (std::size_t i = 0; i < Y.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < Y.cols(); ++c)
      if (Y(i, c) > Y(i, best)) best = c;
    out[i] = label_from_id(static_cast<int>(best));
  }
  return out;
}

template <typename T>
template <typename U>
FusionModel<U> FusionModel<T>::cast() const {
  FusionModel<U> out(config_);
  auto src = params_.tensors();
  auto dst = out.params_.tensors();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].tensor = src[i].tensor->template cast<U>();
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O: text header with the config, then one binary block per
// tensor in declaration order (name, rows, cols, row-major LE float32).

namespace {
constexpr std::string_view kModelMagic = "punc-model v1";
}  // namespace

template <typename T>
void FusionModel<T>::save(std::ostream& out) const {
  out << kModelMagic << '\n';
  for (const auto& [k, v] : config_.to_map()) out << k << '=' << v << '\n';
  out << "end-config\n";
  for (const auto& t : params_.tensors()) {
    binary::write_string(out, t.name);
    binary::write_u32(out, static_cast<std::uint32_t>(t.tensor->rows()));
    binary::write_u32(out, static_cast<std::uint32_t>(t.tensor->cols()));
    for (std::size_t i = 0; i < t.tensor->size(); ++i) binary::write_f32(out, static_cast<float>((*t.tensor)[i]));
  }
}

template <typename T>
FusionModel<T> FusionModel<T>::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kModelMagic)
    throw std::runtime_error("not a model checkpoint (expected '" + std::string(kModelMagic) + "')");
  std::map<std::string, std::string> kv;
  while (std::getline(in, line) && line != "end-config") {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("model checkpoint: bad config line " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  FusionModel<T> model(ModelConfig::from_map(kv));
  for (auto& t : model.params_.tensors()) {
    const auto name = binary::read_string(in);
    const auto rows = binary::read_u32(in);
    const auto cols = binary::read_u32(in);
    if (name != t.name || rows != t.tensor->rows() || cols != t.tensor->cols())
      throw DimensionMismatch("model checkpoint: tensor '" + name + "' " + std::to_string(rows) + "x" +
                              std::to_string(cols) + " does not match expected '" + t.name + "' " +
                              std::to_string(t.tensor->rows()) + "x" + std::to_string(t.tensor->cols()));
    for (std::size_t i = 0; i < t.tensor->size(); ++i) (*t.tensor)[i] = static_cast<T>(binary::read_f32(in));
  }
  return model;
}

template <typename T>
void FusionModel<T>::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model checkpoint " + path);
  save(out);
}

template <typename T>
FusionModel<T> FusionModel<T>::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model checkpoint " + path);
  return load(in);
}

template struct FusionParams<float>;
template struct FusionParams<double>;
template class FusionModel<float>;
template class FusionModel<double>;
template FusionModel<double> FusionModel<float>::cast<double>() const;
template FusionModel<float> FusionModel<double>::cast<float>() const;
template Matrix<float> sinusoidal_positions<float>(std::size_t, std::size_t);
template Matrix<double> sinusoidal_positions<double>(std::size_t, std::size_t);
template struct ForwardTrace<float>;
template struct ForwardTrace<double>;

}  // namespace punc
