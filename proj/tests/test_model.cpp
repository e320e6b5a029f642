#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "punc/model.hpp"
#include "reference_model.hpp"

using namespace punc;

namespace {

ModelConfig tiny_config(PosSource src = PosSource::Tagger) {
  ModelConfig c;
  c.vocab_size = 9;
  c.d = 8;
  c.b = 4;
  c.e = 5;
  c.num_encoder_layers = 1;
  c.encoder_heads = 2;
  c.encoder_ffn_dim = 12;
  c.fusion_layers = 1;
  c.fusion_heads = src == PosSource::None ? 4 : 3;
  c.fusion_ffn_dim = 10;
  c.dropout = 0.0;
  c.seq_len = 6;
  c.pos_source = src;
  c.init_seed = 17;
  return c;
}

/// Shifts every parameter (biases and LayerNorm included) off its initial value.
template <typename T>
void perturb(FusionParams<T>& p, std::uint64_t seed, double std = 0.2) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, std);
  for (auto& t : p.tensors())
    for (auto& v : t.tensor->flat()) v = static_cast<T>(v + noise(rng));
}

void zero(Matrix<double>& m) { m.fill(0.0); }
void zero(Matrix<float>& m) { m.fill(0.0f); }

template <typename T>
void zero_residual_branches(BlockParams<T>& b) {
  zero(b.attention.wo);
  zero(b.attention.bo);
  zero(b.ffn_out_w);
  zero(b.ffn_out_b);
}

const std::vector<int> kTokens = {0, 4, 7, 3, 8, 1};
const std::vector<int> kPos = {4, 0, 2, 2, 3, 4};
const std::vector<PunctLabel> kLabels = {PunctLabel::O,        PunctLabel::COMMA, PunctLabel::O,
                                         PunctLabel::QUESTION, PunctLabel::PERIOD, PunctLabel::O};

/// Worst relative error between analytic and central-difference gradients.
double gradient_check(FusionModel<double>& model, const ForwardOptions& opts, std::span<const std::uint8_t> include,
                      std::size_t* nonzero_groups = nullptr) {
  auto loss_at = [&] { return model.loss_and_grads(model.forward(kTokens, kPos, opts), kLabels, include).loss; };
  const auto analytic = model.loss_and_grads(model.forward(kTokens, kPos, opts), kLabels, include).grads;
  auto params = model.params().tensors();
  const auto grads = analytic.tensors();
  double worst = 0;
  std::set<ParamGroup> nonzero;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto flat = params[t].tensor->flat();
    const auto g = grads[t].tensor->flat();
    for (std::size_t i = 0; i < flat.size(); ++i) {
      const double saved = flat[i];
      flat[i] = saved + 1e-4;
      const double up = loss_at();
      flat[i] = saved - 1e-4;
      const double down = loss_at();
      flat[i] = saved;
      const double numeric = (up - down) / 2e-4;
      worst = std::max(worst, std::abs(numeric - g[i]) / std::max({std::abs(numeric), std::abs(g[i]), 1e-6}));
      if (std::abs(g[i]) > 1e-8) nonzero.insert(params[t].group);
    }
  }
  if (nonzero_groups) *nonzero_groups = nonzero.size();
  return worst;
}

}  // namespace

TEST(ModelConfig, ValidateListsEveryProblem) {
  ModelConfig c;
  c.vocab_size = 100;
  c.fusion_heads = 7;
  c.dropout = 1.0;
  const auto errors = c.validate();
  ASSERT_EQ(errors.size(), 2u);
  EXPECT_EQ(errors[0], "fusion input width d+b=96 must be divisible by fusion_heads=7");
  EXPECT_NE(errors[1].find("dropout"), std::string::npos);
  EXPECT_THROW(FusionModel<float>{c}, std::invalid_argument);
}

TEST(ModelConfig, MapRoundTrip) {
  auto c = tiny_config();
  c.dropout = 0.1;
  c.loss_mask = LossMask::PositionMask;
  c.nontail_pos = NontailPos::X;
  EXPECT_EQ(ModelConfig::from_map(c.to_map()), c);
}

TEST(Encoder, ZeroWeightResidualIdentity) {
  FusionModel<float> m(tiny_config());
  zero_residual_branches(m.params().encoder[0]);
  const auto H = m.encode(kTokens);
  const auto pe = sinusoidal_positions<float>(kTokens.size(), 8);
  for (std::size_t i = 0; i < kTokens.size(); ++i)
    for (std::size_t j = 0; j < 8; ++j)
      EXPECT_EQ(H(i, j), m.params().token_embedding(static_cast<std::size_t>(kTokens[i]), j) + pe(i, j));
}

TEST(Encoder, EvalModeIsDeterministic) {
  auto c = tiny_config();
  c.dropout = 0.3;
  FusionModel<float> m(c);
  EXPECT_EQ(m.encode(kTokens), m.encode(kTokens));
  const ForwardOptions train{Mode::Train, 99};
  EXPECT_EQ(m.encode(kTokens, train), m.encode(kTokens, train));
  EXPECT_NE(m.encode(kTokens, train), m.encode(kTokens));
  EXPECT_NE(m.encode(kTokens, train), m.encode(kTokens, {Mode::Train, 100}));
}

TEST(Encoder, MatchesScalarReference) {
  ModelConfig c = tiny_config();
  c.d = 4;
  c.encoder_heads = 2;
  c.fusion_heads = 4;
  FusionModel<double> m(c);
  perturb(m.params(), 3);
  const std::vector<int> tokens = {5, 0, 2};
  const auto H = m.encode(tokens);
  const auto ref = reference::encode(c, m.params(), tokens);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(H(i, j), ref[i][j], 1e-6);
}

TEST(FusionModel, MatchesScalarReference) {
  for (auto src : {PosSource::Tagger, PosSource::None}) {
    const auto c = tiny_config(src);
    FusionModel<double> m(c);
    perturb(m.params(), 4);
    const auto Y = m.forward(kTokens, kPos).Y;
    const auto ref = reference::forward(c, m.params(), kTokens, kPos);
    const auto Yf = m.cast<float>().forward(kTokens, kPos).Y;
    for (std::size_t i = 0; i < kTokens.size(); ++i)
      for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_NEAR(Y(i, k), ref[i][k], 1e-9);
        EXPECT_NEAR(Yf(i, k), ref[i][k], 1e-5);
      }
  }
}

TEST(FusionModel, OutputRowsAreDistributions) {
  FusionModel<float> m(tiny_config());
  const auto t = m.forward(kTokens, kPos);
  ASSERT_EQ(t.Y.rows(), kTokens.size());
  ASSERT_EQ(t.Y.cols(), 4u);
  for (std::size_t i = 0; i < t.Y.rows(); ++i) {
    double s = 0;
    for (float v : t.Y.row(i)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
  for (const auto& cache : t.fusion_caches)
    for (const auto& probs : cache.probs)
      for (std::size_t i = 0; i < probs.rows(); ++i) {
        double s = 0;
        for (float v : probs.row(i)) s += v;
        EXPECT_NEAR(s, 1.0, 1e-6);
      }
}

TEST(FusionModel, ConcatenatesHAndE) {
  FusionModel<float> m(tiny_config());
  const auto t = m.forward(kTokens, kPos);
  ASSERT_EQ(t.C.cols(), 12u);
  for (std::size_t i = 0; i < kTokens.size(); ++i) {
    for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(t.C(i, j), t.H(i, j));
    for (std::size_t r = 0; r < 4; ++r)
      EXPECT_EQ(t.C(i, 8 + r), m.params().pos_embedding(r, static_cast<std::size_t>(kPos[i])));
  }
}

TEST(FusionModel, ZeroFusionBlockIsLinearReadout) {
  FusionModel<double> m(tiny_config());
  zero_residual_branches(m.params().fusion[0]);
  const auto t = m.forward(kTokens, kPos);
  for (std::size_t i = 0; i < kTokens.size(); ++i) {
    std::vector<double> logits(4);
    for (std::size_t k = 0; k < 4; ++k) {
      logits[k] = m.params().output_b(0, k);
      for (std::size_t j = 0; j < 12; ++j) logits[k] += t.C(i, j) * m.params().output_w(j, k);
    }
    reference::softmax(logits);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(t.Y(i, k), logits[k], 1e-12);
  }
}

TEST(FusionModel, NoneRemovesPosPath) {
  FusionModel<float> m(tiny_config(PosSource::None));
  EXPECT_EQ(m.params().pos_embedding.size(), 0u);
  EXPECT_EQ(m.params().output_w.rows(), 8u);
  const auto t = m.forward(kTokens, {});
  EXPECT_EQ(t.C, t.H);
  EXPECT_THROW(m.set_pos_embedding(Matrix<float>(4, 5)), DimensionMismatch);
}

TEST(FusionModel, RandomPosEmbeddingScale) {
  auto c = tiny_config(PosSource::Random);
  c.b = 64;
  c.e = 20;
  c.fusion_heads = 8;
  FusionModel<double> m(c);
  double sq = 0;
  for (double v : m.params().pos_embedding.flat()) sq += v * v;
  const double std = std::sqrt(sq / static_cast<double>(m.params().pos_embedding.size()));
  EXPECT_NEAR(std, 1.0 / 8.0, 0.02);
}

TEST(FusionModel, SetPosEmbeddingChecksShape) {
  FusionModel<float> m(tiny_config());
  EXPECT_THROW(m.set_pos_embedding(Matrix<float>(5, 4)), DimensionMismatch);
  Matrix<float> W(4, 5);
  W.fill(0.5f);
  m.set_pos_embedding(W);
  EXPECT_EQ(m.params().pos_embedding, W);
}

TEST(FusionModel, TagPermutationInvariance) {
  FusionModel<double> m(tiny_config());
  perturb(m.params(), 8);
  const std::vector<int> perm = {3, 0, 4, 1, 2};  // old tag t becomes perm[t]
  FusionModel<double> p = m;
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t t = 0; t < 5; ++t)
      p.params().pos_embedding(r, static_cast<std::size_t>(perm[t])) = m.params().pos_embedding(r, t);
  std::vector<int> pos2;
  for (int t : kPos) pos2.push_back(perm[static_cast<std::size_t>(t)]);
  EXPECT_EQ(m.forward(kTokens, kPos).Y, p.forward(kTokens, pos2).Y);
}

TEST(FusionModel, OutOfRangeIdsThrow) {
  FusionModel<float> m(tiny_config());
  EXPECT_THROW(m.forward(std::vector<int>{0, 9}, std::vector<int>{0, 0}), IdOutOfRange);
  EXPECT_THROW(m.forward(std::vector<int>{0, 1}, std::vector<int>{0, 5}), IdOutOfRange);
  EXPECT_THROW(m.forward(std::vector<int>{0, 1}, std::vector<int>{0}), std::invalid_argument);
}

TEST(Loss, PerfectPredictionIsZeroAndUniformIsLn4) {
  ForwardTrace<double> t;
  t.tokens = {0, 1};
  t.Y = Matrix<double>(2, 4);
  t.Y(0, 2) = 1.0;
  for (std::size_t k = 0; k < 4; ++k) t.Y(1, k) = 0.25;
  const std::vector<PunctLabel> labels = {PunctLabel::PERIOD, PunctLabel::COMMA};
  const std::vector<std::uint8_t> first = {1, 0}, second = {0, 1};
  EXPECT_DOUBLE_EQ(FusionModel<double>::loss_sum(t, labels, first), 0.0);
  EXPECT_NEAR(FusionModel<double>::loss_sum(t, labels, second), std::log(4.0), 1e-12);
}

TEST(Loss, PositionMaskSelection) {
  const std::vector<std::uint8_t> mask = {0, 1, 0, 1};
  EXPECT_EQ(loss_positions(LossMask::None, mask), (std::vector<std::uint8_t>{1, 1, 1, 1}));
  EXPECT_EQ(loss_positions(LossMask::PositionMask, mask), mask);
}

TEST(Gradients, MatchFiniteDifferencesWithPos) {
  FusionModel<double> m(tiny_config());
  perturb(m.params(), 5);
  std::size_t groups = 0;
  EXPECT_LT(gradient_check(m, {}, {}, &groups), 1e-4);
  EXPECT_EQ(groups, 4u);
}

TEST(Gradients, MatchFiniteDifferencesWithoutPos) {
  FusionModel<double> m(tiny_config(PosSource::None));
  perturb(m.params(), 6);
  std::size_t groups = 0;
  EXPECT_LT(gradient_check(m, {}, {}, &groups), 1e-4);
  EXPECT_EQ(groups, 3u);
}

TEST(Gradients, MatchFiniteDifferencesWithDropoutAndMask) {
  auto c = tiny_config();
  c.dropout = 0.25;
  c.num_encoder_layers = 2;
  FusionModel<double> m(c);
  perturb(m.params(), 7);
  const std::vector<std::uint8_t> include = {0, 1, 1, 0, 1, 0};
  EXPECT_LT(gradient_check(m, {Mode::Train, 1234}, include), 1e-4);
}

TEST(Gradients, PosEmbeddingReceivesGradient) {
  FusionModel<float> m(tiny_config());
  const auto lg = m.loss_and_grads(m.forward(kTokens, kPos), kLabels);
  double sq = 0;
  for (float v : lg.grads.pos_embedding.flat()) sq += static_cast<double>(v) * v;
  EXPECT_GT(std::sqrt(sq), 0.0);
  // Columns of tags that never occur get no gradient.
  for (std::size_t r = 0; r < 4; ++r) EXPECT_EQ(lg.grads.pos_embedding(r, 1), 0.0f);
}

TEST(Checkpoint, SaveLoadIsBitExact) {
  auto c = tiny_config();
  c.dropout = 0.1;
  FusionModel<float> m(c);
  perturb(m.params(), 9);
  std::stringstream ss;
  m.save(ss);
  const auto text = ss.str();
  const auto loaded = FusionModel<float>::load(ss);
  EXPECT_EQ(loaded.config(), m.config());
  EXPECT_EQ(loaded.forward(kTokens, kPos).Y, m.forward(kTokens, kPos).Y);
  std::stringstream again;
  loaded.save(again);
  EXPECT_EQ(again.str(), text);

  std::stringstream truncated(text.substr(0, text.size() / 2));
  EXPECT_THROW(FusionModel<float>::load(truncated), std::runtime_error);
  std::stringstream bad("punc-tagger v1\n");
  EXPECT_THROW(FusionModel<float>::load(bad), std::runtime_error);
}

TEST(FusionParams, ArithmeticAndCount) {
  FusionModel<float> m(tiny_config());
  auto z = m.params().zeros_like();
  for (const auto& t : z.tensors())
    for (float v : t.tensor->flat()) EXPECT_EQ(v, 0.0f);
  z.add(m.params());
  z.scale(2.0f);
  EXPECT_EQ(z.token_embedding(3, 2), 2.0f * m.params().token_embedding(3, 2));
  std::size_t total = 0;
  for (const auto& t : m.params().tensors()) total += t.tensor->size();
  EXPECT_EQ(m.params().parameter_count(), total);
}
