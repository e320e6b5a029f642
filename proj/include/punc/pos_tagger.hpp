#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "punc/tensor.hpp"

namespace punc {

class UnknownTag : public std::invalid_argument {
 public:
  explicit UnknownTag(const std::string& tag);
};

class IdOutOfRange : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// The 17 Universal POS tags followed by reserved slots up to e.
class PosTagset {
 public:
  static constexpr std::size_t kDefaultSize = 20;

  static PosTagset universal(std::size_t e = kDefaultSize);
  explicit PosTagset(std::vector<std::string> tags);
  PosTagset() = default;

  std::size_t size() const { return tags_.size(); }
  const std::vector<std::string>& tags() const { return tags_; }
  const std::string& name(int id) const { return tags_.at(static_cast<std::size_t>(id)); }
  std::optional<int> id(std::string_view tag) const;
  int x_id() const { return *id("X"); }

  bool operator==(const PosTagset& o) const { return tags_ == o.tags_; }

 private:
  std::vector<std::string> tags_;
  std::unordered_map<std::string, int> index_;
};

struct TaggedSentence {
  std::vector<std::string> words;
  std::vector<std::string> tags;
};

/// `word<TAB>UPOS` lines; blank lines separate sentences.
std::vector<TaggedSentence> parse_tagged_tsv(std::istream& in);
std::vector<TaggedSentence> read_tagged_file(const std::string& path);
void write_tagged_tsv(std::ostream& out, std::span<const TaggedSentence> sentences);

struct TaggerConfig {
  std::size_t b = 32;
  std::size_t e = PosTagset::kDefaultSize;
  std::size_t buckets = 1u << 14;  // hashed feature table rows
  std::size_t epochs = 10;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
};

/// Hashed word features -> tanh hidden layer of width b -> softmax of width
/// e. The softmax weight matrix W (b x e) doubles as the POS embedding table.
class PosTagger {
 public:
  PosTagger() = default;
  PosTagger(PosTagset tagset, std::size_t b, std::size_t buckets, std::uint64_t seed);

  const PosTagset& tagset() const { return tagset_; }
  std::size_t hidden_size() const { return b_; }
  std::size_t buckets() const { return buckets_; }
  const Matrix<float>& softmax_weights() const { return W_; }
  const Matrix<float>& softmax_bias() const { return bias_; }

  /// Feature bucket ids for word i of a sentence.
  std::vector<std::size_t> features(std::span<const std::string> words, std::size_t i) const;
  std::vector<double> probabilities(std::span<const std::string> words, std::size_t i) const;
  std::vector<int> predict_tags(std::span<const std::string> words) const;

  /// One SGD step on a single word; returns its cross entropy.
  double sgd_update(std::span<const std::string> words, std::size_t i, int gold, double lr);

  void save(std::ostream& out) const;
  static PosTagger load(std::istream& in);
  void save_file(const std::string& path) const;
  static PosTagger load_file(const std::string& path);

  bool operator==(const PosTagger&) const = default;

 private:
  std::vector<float> hidden(std::span<const std::size_t> feats) const;

  PosTagset tagset_;
  std::size_t b_ = 0;
  std::size_t buckets_ = 0;
  Matrix<float> feature_embedding_;  // buckets x b
  Matrix<float> hidden_bias_;        // 1 x b
  Matrix<float> W_;                  // b x e
  Matrix<float> bias_;               // 1 x e
};

/// Trains with per-word SGD in a seeded shuffled order. Throws UnknownTag
/// for tags outside the tagset.
PosTagger train_tagger(std::span<const TaggedSentence> corpus, const TaggerConfig& cfg);

/// Fraction of words whose predicted tag equals the gold tag.
double tag_accuracy(const PosTagger& tagger, std::span<const TaggedSentence> data);

/// E[i] = column ids[i] of W (W is b x e); rows of E are bit-equal copies.
template <typename T>
Matrix<T> pos_embed(const Matrix<T>& W, std::span<const int> ids) {
  Matrix<T> E(ids.size(), W.rows());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= W.cols())
      throw IdOutOfRange("POS id " + std::to_string(ids[i]) + " outside tagset of size " +
                         std::to_string(W.cols()));
    const auto col = static_cast<std::size_t>(ids[i]);
    for (std::size_t r = 0; r < W.rows(); ++r) E(i, r) = W(r, col);
  }
  return E;
}

}  // namespace punc
