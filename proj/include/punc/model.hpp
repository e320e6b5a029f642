#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "punc/corpus_io.hpp"
#include "punc/pos_tagger.hpp"
#include "punc/tokenizer.hpp"
#include "punc/tensor.hpp"

namespace punc {

enum class PosSource { None, Random, Tagger };
enum class LossMask { None, PositionMask };

std::string_view to_string(PosSource s);
std::string_view to_string(LossMask m);
std::string_view to_string(NontailPos p);

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t d = 64;  // encoder width
  std::size_t b = 32;  // POS embedding width
  std::size_t e = 20;  // POS tagset size
  std::size_t num_encoder_layers = 2;
  std::size_t encoder_heads = 4;
  std::size_t encoder_ffn_dim = 256;
  std::size_t fusion_layers = 1;
  std::size_t fusion_heads = 8;
  std::size_t fusion_ffn_dim = 384;
  double dropout = 0.1;
  std::size_t seq_len = 256;
  PosSource pos_source = PosSource::Tagger;
  LossMask loss_mask = LossMask::None;
  NontailPos nontail_pos = NontailPos::Copy;  // input policy, kept with the weights
  std::uint64_t init_seed = 0;

  static constexpr std::size_t num_labels = kNumLabels;

  /// Width of the fusion block input: d + b, or d without POS input.
  std::size_t fusion_width() const { return pos_source == PosSource::None ? d : d + b; }
  bool uses_pos() const { return pos_source != PosSource::None; }

  /// Every violated constraint, one message each.
  std::vector<std::string> validate() const;

  std::map<std::string, std::string> to_map() const;
  static ModelConfig from_map(const std::map<std::string, std::string>& kv);

  bool operator==(const ModelConfig&) const = default;
};

/// theta, W, gamma and eta of the fusion model.
enum class ParamGroup { Encoder, PosEmbedding, Fusion, Output };
std::string_view to_string(ParamGroup g);

template <typename T>
struct AttentionParams {
  Matrix<T> wq, bq, wk, bk, wv, bv, wo, bo;
};

/// Pre-norm transformer layer: x + Drop(MHA(LN(x))), then + Drop(FFN(LN(.))).
template <typename T>
struct BlockParams {
  Matrix<T> ln1_gain, ln1_bias;
  AttentionParams<T> attention;
  Matrix<T> ln2_gain, ln2_bias;
  Matrix<T> ffn_in_w, ffn_in_b, ffn_out_w, ffn_out_b;
};

template <typename T>
struct NamedTensor {
  std::string name;
  ParamGroup group;
  Matrix<T>* tensor;
};

template <typename T>
struct ConstNamedTensor {
  std::string name;
  ParamGroup group;
  const Matrix<T>* tensor;
};

template <typename T>
struct FusionParams {
  Matrix<T> token_embedding;                // vocab x d
  std::vector<BlockParams<T>> encoder;
  Matrix<T> pos_embedding;                  // b x e; column j embeds tag j; empty without POS
  std::vector<BlockParams<T>> fusion;
  Matrix<T> output_w;                       // width x 4
  Matrix<T> output_b;                       // 1 x 4

  /// All tensors in declaration order.
  std::vector<NamedTensor<T>> tensors();
  std::vector<ConstNamedTensor<T>> tensors() const;

  /// Same shapes, all zeros.
  FusionParams zeros_like() const;
  void add(const FusionParams& other);
  void scale(T factor);
  std::size_t parameter_count() const;
};

enum class Mode { Train, Eval };

struct ForwardOptions {
  Mode mode = Mode::Eval;
  /// Seeds the dropout masks; callers derive it from (seed, step, sample).
  std::uint64_t dropout_stream = 0;
};

template <typename T>
struct LayerNormCache {
  Matrix<T> xhat;
  std::vector<T> rstd;
};

template <typename T>
struct BlockCache {
  Matrix<T> input;
  LayerNormCache<T> ln1;
  Matrix<T> normed1;
  Matrix<T> q, k, v;
  std::vector<Matrix<T>> probs;  // one n x n matrix per head
  Matrix<T> context;             // concatenated head outputs, before wo
  Matrix<T> drop1;               // scaled keep mask; empty when dropout is off
  Matrix<T> x1;
  LayerNormCache<T> ln2;
  Matrix<T> normed2;
  Matrix<T> pre_act;
  Matrix<T> act;
  Matrix<T> drop2;
};

template <typename T>
struct ForwardTrace {
  Mode mode = Mode::Eval;
  std::vector<int> tokens;
  std::vector<int> pos_ids;
  std::vector<BlockCache<T>> encoder_caches;
  Matrix<T> H;  // n x d
  Matrix<T> E;  // n x b (empty without POS)
  Matrix<T> C;  // n x (d + b)
  std::vector<BlockCache<T>> fusion_caches;
  Matrix<T> Z;  // fusion output
  Matrix<T> Y;  // n x 4 probabilities

  std::size_t length() const { return tokens.size(); }
  std::vector<PunctLabel> argmax() const;
};

template <typename T>
struct LossAndGrads {
  double loss = 0.0;
  std::size_t positions = 0;  // number of positions averaged over
  FusionParams<T> grads;
};

/// Fixed sinusoidal position table, n x d.
template <typename T>
Matrix<T> sinusoidal_positions(std::size_t n, std::size_t d);

template <typename T>
class FusionModel {
 public:
  FusionModel() = default;
  /// Validates the config (throws std::invalid_argument listing every
  /// problem) and initializes parameters from init_seed.
  explicit FusionModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  FusionParams<T>& params() { return params_; }
  const FusionParams<T>& params() const { return params_; }

  /// Replaces W with a tagger's softmax weights (b x e).
  void set_pos_embedding(const Matrix<T>& W);

  Matrix<T> encode(std::span<const int> tokens, const ForwardOptions& opts = {}) const;
  ForwardTrace<T> forward(std::span<const int> tokens, std::span<const int> pos_ids,
                          const ForwardOptions& opts = {}) const;

  /// Mean cross entropy over the included positions (all when `include` is
  /// empty) and exact gradients for every parameter.
  LossAndGrads<T> loss_and_grads(const ForwardTrace<T>& trace, std::span<const PunctLabel> labels,
                                 std::span<const std::uint8_t> include = {}) const;

  /// Cross entropy summed over the included positions.
  static double loss_sum(const ForwardTrace<T>& trace, std::span<const PunctLabel> labels,
                         std::span<const std::uint8_t> include = {});

  template <typename U>
  FusionModel<U> cast() const;

  void save(std::ostream& out) const;
  static FusionModel load(std::istream& in);
  void save_file(const std::string& path) const;
  static FusionModel load_file(const std::string& path);

 private:
  template <typename U>
  friend class FusionModel;

  ModelConfig config_;
  FusionParams<T> params_;
};

/// Which positions enter the training loss under the configured LossMask.
std::vector<std::uint8_t> loss_positions(LossMask mask, std::span<const std::uint8_t> position_mask);

extern template class FusionModel<float>;
extern template class FusionModel<double>;

}  // namespace punc
