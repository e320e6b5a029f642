#include "punc/pos_tagger.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>

#include "punc/binary_io.hpp"
#include "punc/sampler.hpp"

namespace punc {

namespace {

constexpr std::array<const char*, 17> kUniversalTags = {
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X"};

constexpr std::string_view kTaggerMagic = "punc-tagger v1";

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string_view prefix_chars(std::string_view w, std::size_t n) { return w.substr(0, std::min(n, w.size())); }
std::string_view suffix_chars(std::string_view w, std::size_t n) {
  return w.size() <= n ? w : w.substr(w.size() - n);
}

}  // namespace

UnknownTag::UnknownTag(const std::string& tag) : std::invalid_argument("unknown POS tag '" + tag + "'") {}

PosTagset PosTagset::universal(std::size_t e) {
  if (e < kUniversalTags.size() + 1)
    throw std::invalid_argument("tagset size e must be at least 18, got " + std::to_string(e));
  std::vector<std::string> tags(kUniversalTags.begin(), kUniversalTags.end());
  for (std::size_t r = 0; tags.size() < e; ++r) tags.push_back("<reserved" + std::to_string(r) + ">");
  return PosTagset(std::move(tags));
}

PosTagset::PosTagset(std::vector<std::string> tags) : tags_(std::move(tags)) {
  for (std::size_t i = 0; i < tags_.size(); ++i) {
    if (!index_.emplace(tags_[i], static_cast<int>(i)).second)
      throw std::invalid_argument("duplicate tag '" + tags_[i] + "' in tagset");
  }
  if (!index_.contains("X")) throw std::invalid_argument("tagset must contain X");
}

std::optional<int> PosTagset::id(std::string_view tag) const {
  auto it = index_.find(std::string(tag));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// Tagged corpus files

std::vector<TaggedSentence> parse_tagged_tsv(std::istream& in) {
  std::vector<TaggedSentence> out;
  TaggedSentence cur;
  std::string line;
  std::size_t line_no = 0;
  auto flush = [&] {
    if (!cur.words.empty()) out.push_back(std::move(cur));
    cur = {};
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || line.find('\t', tab + 1) != std::string::npos)
      throw std::runtime_error("tagged corpus line " + std::to_string(line_no) + ": expected word<TAB>TAG");
    cur.words.push_back(line.substr(0, tab));
    cur.tags.push_back(line.substr(tab + 1));
  }
  flush();
  return out;
}

std::vector<TaggedSentence> read_tagged_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tagged corpus " + path);
  return parse_tagged_tsv(in);
}

void write_tagged_tsv(std::ostream& out, std::span<const TaggedSentence> sentences) {
  for (const auto& s : sentences) {
    for (std::size_t i = 0; i < s.words.size(); ++i) out << s.words[i] << '\t' << s.tags[i] << '\n';
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// PosTagger

PosTagger::PosTagger(PosTagset tagset, std::size_t b, std::size_t buckets, std::uint64_t seed)
    : tagset_(std::move(tagset)), b_(b), buckets_(buckets) {
  if (b_ == 0) throw std::invalid_argument("tagger hidden size b must be >= 1");
  if (buckets_ == 0) throw std::invalid_argument("tagger needs at least one feature bucket");
  std::mt19937_64 rng(seed);
  feature_embedding_ = Matrix<float>(buckets_, b_);
  fill_normal(feature_embedding_, 0.1, rng);
  hidden_bias_ = Matrix<float>(1, b_);
  W_ = Matrix<float>(b_, tagset_.size());
  fill_normal(W_, 1.0 / std::sqrt(static_cast<double>(b_)), rng);
  bias_ = Matrix<float>(1, tagset_.size());
}

std::vector<std::size_t> PosTagger::features(std::span<const std::string> words, std::size_t i) const {
  const std::string_view w = words[i];
  const std::string_view prev = i > 0 ? std::string_view(words[i - 1]) : std::string_view("<s>");
  const std::string_view next = i + 1 < words.size() ? std::string_view(words[i + 1]) : std::string_view("</s>");
  const std::string keys[] = {
      "w=" + std::string(w),
      "p3=" + std::string(prefix_chars(w, 3)),
      "s3=" + std::string(suffix_chars(w, 3)),
      "s2=" + std::string(suffix_chars(w, 2)),
      "l=" + std::string(prev),
      "r=" + std::string(next),
      "ls=" + std::string(suffix_chars(prev, 3)),
      "rs=" + std::string(suffix_chars(next, 3)),
  };
  std::vector<std::size_t> out;
  out.reserve(std::size(keys));
  for (const auto& k : keys) out.push_back(static_cast<std::size_t>(fnv1a(k) % buckets_));
  return out;
}

std::vector<float> PosTagger::hidden(std::span<const std::size_t> feats) const {
  std::vector<float> h(hidden_bias_.flat().begin(), hidden_bias_.flat().end());
  for (auto f : feats) {
    const auto row = feature_embedding_.row(f);
    for (std::size_t r = 0; r < b_; ++r) h[r] += row[r];
  }
  for (auto& v : h) v = std::tanh(v);
  return h;
}

namespace {

std::vector<double> softmax_logits(const std::vector<float>& h, const Matrix<float>& W, const Matrix<float>& bias) {
  const std::size_t e = W.cols();
  std::vector<double> logits(e);
  for (std::size_t j = 0; j < e; ++j) logits[j] = bias[j];
  for (std::size_t r = 0; r < h.size(); ++r) {
    const auto wrow = W.row(r);
    for (std::size_t j = 0; j < e; ++j) logits[j] += static_cast<double>(h[r]) * wrow[j];
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (auto& v : logits) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : logits) v /= sum;
  return logits;
}

}  // namespace

std::vector<double> PosTagger::probabilities(std::span<const std::string> words, std::size_t i) const {
  const auto feats = features(words, i);
  return softmax_logits(hidden(feats), W_, bias_);
}

std::vector<int> PosTagger::predict_tags(std::span<const std::string> words) const {
  std::vector<int> out(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto p = probabilities(words, i);
    out[i] = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
  }
  return out;
}

double PosTagger::sgd_update(std::span<const std::string> words, std::size_t i, int gold, double lr) {
  const auto feats = features(words, i);
  const auto h = hidden(feats);
  auto p = softmax_logits(h, W_, bias_);
  const double loss = -std::log(std::max(p[static_cast<std::size_t>(gold)], 1e-300));
  p[static_cast<std::size_t>(gold)] -= 1.0;  // dlogits
  const std::size_t e = tagset_.size();
  std::vector<double> dpre(b_, 0.0);
  for (std::size_t r = 0; r < b_; ++r) {
    auto wrow = W_.row(r);
    double dh = 0.0;
    for (std::size_t j = 0; j < e; ++j) {
      dh += wrow[j] * p[j];
      wrow[j] = static_cast<float>(wrow[j] - lr * h[r] * p[j]);
    }
    dpre[r] = dh * (1.0 - static_cast<double>(h[r]) * h[r]);
  }
  for (std::size_t j = 0; j < e; ++j) bias_[j] = static_cast<float>(bias_[j] - lr * p[j]);
  for (std::size_t r = 0; r < b_; ++r) hidden_bias_[r] = static_cast<float>(hidden_bias_[r] - lr * dpre[r]);
  for (auto f : feats) {
    auto row = feature_embedding_.row(f);
    for (std::size_t r = 0; r < b_; ++r) row[r] = static_cast<float>(row[r] - lr * dpre[r]);
  }
  return loss;
}

void PosTagger::save(std::ostream& out) const {
  out << kTaggerMagic << '\n';
  binary::write_u32(out, static_cast<std::uint32_t>(b_));
  binary::write_u32(out, static_cast<std::uint32_t>(tagset_.size()));
  binary::write_u32(out, static_cast<std::uint32_t>(buckets_));
  for (const auto& t : tagset_.tags()) binary::write_string(out, t);
  for (float v : W_.flat()) binary::write_f32(out, v);
  for (float v : bias_.flat()) binary::write_f32(out, v);
  for (float v : feature_embedding_.flat()) binary::write_f32(out, v);
  for (float v : hidden_bias_.flat()) binary::write_f32(out, v);
}

PosTagger PosTagger::load(std::istream& in) {
  std::string magic;
  if (!std::getline(in, magic) || magic != kTaggerMagic)
    throw std::runtime_error("not a tagger checkpoint (expected '" + std::string(kTaggerMagic) + "')");
  PosTagger t;
  t.b_ = binary::read_u32(in);
  const std::size_t e = binary::read_u32(in);
  t.buckets_ = binary::read_u32(in);
  std::vector<std::string> tags;
  for (std::size_t j = 0; j < e; ++j) tags.push_back(binary::read_string(in));
  t.tagset_ = PosTagset(std::move(tags));
  t.W_ = Matrix<float>(t.b_, e);
  t.bias_ = Matrix<float>(1, e);
  t.feature_embedding_ = Matrix<float>(t.buckets_, t.b_);
  t.hidden_bias_ = Matrix<float>(1, t.b_);
  for (float& v : t.W_.flat()) v = binary::read_f32(in);
  for (float& v : t.bias_.flat()) v = binary::read_f32(in);
  for (float& v : t.feature_embedding_.flat()) v = binary::read_f32(in);
  for (float& v : t.hidden_bias_.flat()) v = binary::read_f32(in);
  return t;
}

void PosTagger::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write tagger checkpoint " + path);
  save(out);
}

PosTagger PosTagger::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open tagger checkpoint " + path);
  return load(in);
}

PosTagger train_tagger(std::span<const TaggedSentence> corpus, const TaggerConfig& cfg) {
  PosTagger tagger(PosTagset::universal(cfg.e), cfg.b, cfg.buckets, cfg.seed);
  std::vector<std::vector<int>> gold(corpus.size());
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    if (corpus[s].words.size() != corpus[s].tags.size())
      throw std::invalid_argument("tagged sentence with mismatched word/tag counts");
    for (const auto& tag : corpus[s].tags) {
      auto id = tagger.tagset().id(tag);
      if (!id) throw UnknownTag(tag);
      gold[s].push_back(*id);
    }
  }
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[uniform_below(i, counter_hash({cfg.seed, epoch, i}))]);
    for (std::size_t s : order)
      for (std::size_t i = 0; i < corpus[s].words.size(); ++i)
        tagger.sgd_update(corpus[s].words, i, gold[s][i], cfg.learning_rate);
  }
  return tagger;
}

double tag_accuracy(const PosTagger& tagger, std::span<const TaggedSentence> data) {
  std::size_t correct = 0, total = 0;
  for (const auto& s : data) {
    const auto pred = tagger.predict_tags(s.words);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      auto gold = tagger.tagset().id(s.tags[i]);
      if (gold && *gold == pred[i]) ++correct;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace punc
