#include "punc/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace punc {

VocabTooSmall::VocabTooSmall(std::size_t requested, std::size_t required)
    : std::invalid_argument("vocab_size " + std::to_string(requested) + " is below the " +
                            std::to_string(required) +
                            " pieces needed for every seen character plus 3 specials") {}

std::vector<std::string_view> utf8_chars(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto lead = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (lead >= 0xF0 && lead < 0xF8)
      len = 4;
    else if (lead >= 0xE0)
      len = 3;
    else if (lead >= 0xC0)
      len = 2;
    if (i + len > s.size()) len = 1;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    }
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

// ---------------------------------------------------------------------------
// SubwordVocab

SubwordVocab::SubwordVocab() {
  add(std::string(kBos));
  add(std::string(kEos));
  add(std::string(kUnk));
}

SubwordVocab SubwordVocab::from_pieces(const std::vector<std::string>& pieces) {
  SubwordVocab v;
  for (const auto& p : pieces) v.add(p);
  return v;
}

std::optional<int> SubwordVocab::id(std::string_view piece) const {
  auto it = index_.find(std::string(piece));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int SubwordVocab::add(std::string piece) {
  if (auto it = index_.find(piece); it != index_.end()) return it->second;
  const int id = static_cast<int>(pieces_.size());
  max_piece_bytes_ = std::max(max_piece_bytes_, piece.size());
  index_.emplace(piece, id);
  pieces_.push_back(std::move(piece));
  return id;
}

void SubwordVocab::save(std::ostream& out) const {
  out << "#punc-vocab v1 size=" << pieces_.size() << " bos=" << kBosId << " eos=" << kEosId
      << " unk=" << kUnkId << " prefix=" << kPrefix << '\n';
  for (const auto& p : pieces_) out << p << '\n';
}

SubwordVocab SubwordVocab::load(std::istream& in) {
  std::string header;
  if (!std::getline(in, header) || header.rfind("#punc-vocab v1 ", 0) != 0)
    throw std::runtime_error("vocab file: missing '#punc-vocab v1' header");
  std::size_t declared = 0;
  std::istringstream fields(header.substr(15));
  std::string field;
  while (fields >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) continue;
    const auto key = field.substr(0, eq);
    const auto value = field.substr(eq + 1);
    if (key == "size") declared = std::stoul(value);
    if (key == "prefix" && value != kPrefix)
      throw std::runtime_error("vocab file: unsupported continuation prefix " + value);
    if ((key == "bos" && value != "0") || (key == "eos" && value != "1") ||
        (key == "unk" && value != "2"))
      throw std::runtime_error("vocab file: unsupported special id " + field);
  }
  std::vector<std::string> pieces;
  std::string line;
  while (std::getline(in, line)) pieces.push_back(line);
  if (pieces.size() != declared)
    throw std::runtime_error("vocab file: header declares " + std::to_string(declared) +
                             " pieces, found " + std::to_string(pieces.size()));
  if (pieces.size() < 3 || pieces[0] != kBos || pieces[1] != kEos || pieces[2] != kUnk)
    throw std::runtime_error("vocab file: special pieces missing");
  SubwordVocab v;
  for (std::size_t i = 3; i < pieces.size(); ++i) {
    if (v.add(pieces[i]) != static_cast<int>(i))
      throw std::runtime_error("vocab file: duplicate piece '" + pieces[i] + "'");
  }
  return v;
}

void SubwordVocab::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocab file " + path);
  save(out);
}

SubwordVocab SubwordVocab::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open vocab file " + path);
  return load(in);
}

// ---------------------------------------------------------------------------
// Training

namespace {

using PairKey = std::uint64_t;

PairKey make_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}
int key_left(PairKey k) { return static_cast<int>(k >> 32); }
int key_right(PairKey k) { return static_cast<int>(k & 0xffffffffu); }

std::string merged_piece(const std::string& left, const std::string& right) {
  std::string_view tail(right);
  if (tail.starts_with(SubwordVocab::kPrefix)) tail.remove_prefix(SubwordVocab::kPrefix.size());
  return left + std::string(tail);
}

class BpeTrainer {
 public:
  BpeTrainer(const std::map<std::string, std::int64_t>& counts) {
    std::set<std::string> alphabet;
    for (const auto& [word, n] : counts) {
      std::vector<std::string> syms;
      bool first = true;
      for (auto ch : utf8_chars(word)) {
        syms.push_back(first ? std::string(ch) : std::string(SubwordVocab::kPrefix) + std::string(ch));
        first = false;
      }
      alphabet.insert(syms.begin(), syms.end());
      raw_.push_back(std::move(syms));
      freq_.push_back(n);
    }
    for (const auto& a : alphabet) vocab_.add(a);
    words_.resize(raw_.size());
    for (std::size_t w = 0; w < raw_.size(); ++w) {
      for (const auto& s : raw_[w]) words_[w].push_back(*vocab_.id(s));
      add_pairs(w, +1);
    }
  }

  std::size_t base_size() const { return vocab_.size(); }

  SubwordVocab run(std::size_t target) {
    while (vocab_.size() < target && !ranked_.empty()) {
      const auto best = *ranked_.begin();
      if (best.count < 2) break;
      merge(best.key);
    }
    return vocab_;
  }

 private:
  struct Ranked {
    std::int64_t count;
    PairKey key;
  };
  struct RankedLess {
    const SubwordVocab* vocab;
    bool operator()(const Ranked& x, const Ranked& y) const {
      if (x.count != y.count) return x.count > y.count;
      const auto& xl = vocab->piece(key_left(x.key));
      const auto& yl = vocab->piece(key_left(y.key));
      if (xl != yl) return xl < yl;
      return vocab->piece(key_right(x.key)) < vocab->piece(key_right(y.key));
    }
  };

  void adjust(PairKey key, std::int64_t delta, std::size_t word) {
    auto& c = pair_count_[key];
    if (c > 0) ranked_.erase(Ranked{c, key});
    c += delta;
    if (c > 0) ranked_.insert(Ranked{c, key});
    if (delta > 0) where_[key].push_back(word);
  }

  void add_pairs(std::size_t w, int sign) {
    const auto& syms = words_[w];
    for (std::size_t i = 0; i + 1 < syms.size(); ++i)
      adjust(make_key(syms[i], syms[i + 1]), sign * freq_[w], w);
  }

  void merge(PairKey key) {
    const int left = key_left(key);
    const int right = key_right(key);
    const int merged = vocab_.add(merged_piece(vocab_.piece(left), vocab_.piece(right)));
    auto affected = std::move(where_[key]);
    where_.erase(key);
    std::sort(affected.begin(), affected.end());
    affected.erase(std::unique(affected.begin(), affected.end()), affected.end());
    for (std::size_t w : affected) {
      auto& syms = words_[w];
      bool present = false;
      for (std::size_t i = 0; i + 1 < syms.size(); ++i)
        if (syms[i] == left && syms[i + 1] == right) present = true;
      if (!present) continue;
      add_pairs(w, -1);
      std::vector<int> next;
      next.reserve(syms.size());
      for (std::size_t i = 0; i < syms.size(); ++i) {
        if (i + 1 < syms.size() && syms[i] == left && syms[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(syms[i]);
        }
      }
      syms = std::move(next);
      add_pairs(w, +1);
    }
  }

  SubwordVocab vocab_;
  std::vector<std::vector<std::string>> raw_;
  std::vector<std::vector<int>> words_;
  std::vector<std::int64_t> freq_;
  std::unordered_map<PairKey, std::int64_t> pair_count_;
  std::unordered_map<PairKey, std::vector<std::size_t>> where_;
  std::set<Ranked, RankedLess> ranked_{RankedLess{&vocab_}};
};

}  // namespace

SubwordVocab train_vocab(const std::vector<std::string>& words, std::size_t vocab_size) {
  std::map<std::string, std::int64_t> counts;
  for (const auto& w : words) ++counts[w];
  BpeTrainer trainer(counts);
  if (vocab_size < trainer.base_size()) throw VocabTooSmall(vocab_size, trainer.base_size());
  return trainer.run(vocab_size);
}

SubwordVocab train_vocab(const LabeledCorpus& corpus, std::size_t vocab_size) {
  return train_vocab(corpus.words(), vocab_size);
}

// ---------------------------------------------------------------------------
// Tokenization

std::vector<int> tokenize_word_ids(const SubwordVocab& vocab, std::string_view word) {
  const auto chars = utf8_chars(word);
  std::vector<int> ids;
  std::string candidate;
  std::size_t pos = 0;
  while (pos < chars.size()) {
    const std::size_t start_byte = static_cast<std::size_t>(chars[pos].data() - word.data());
    std::optional<int> found;
    std::size_t found_end = pos;
    for (std::size_t end = chars.size(); end > pos; --end) {
      const std::size_t end_byte = static_cast<std::size_t>(chars[end - 1].data() - word.data()) +
                                   chars[end - 1].size();
      if (end_byte - start_byte > vocab.max_piece_bytes_) continue;
      candidate.clear();
      if (pos > 0) candidate += SubwordVocab::kPrefix;
      candidate += word.substr(start_byte, end_byte - start_byte);
      if (auto id = vocab.id(candidate)) {
        found = id;
        found_end = end;
        break;
      }
    }
    if (found) {
      ids.push_back(*found);
      pos = found_end;
    } else {
      ids.push_back(SubwordVocab::kUnkId);
      ++pos;
    }
  }
  return ids;
}

std::vector<std::string> tokenize_word(const SubwordVocab& vocab, std::string_view word) {
  std::vector<std::string> out;
  for (int id : tokenize_word_ids(vocab, word)) out.push_back(vocab.piece(id));
  return out;
}

std::string detokenize_word(std::span<const std::string> pieces) {
  std::string out;
  for (const auto& p : pieces) {
    std::string_view v(p);
    if (v.starts_with(SubwordVocab::kPrefix)) v.remove_prefix(SubwordVocab::kPrefix.size());
    out += v;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Alignment

TokenSequence TokenSequence::slice(std::size_t begin, std::size_t length) const {
  if (begin + length > size()) throw std::out_of_range("token slice past end of sequence");
  TokenSequence out;
  const auto b = static_cast<std::ptrdiff_t>(begin);
  const auto e = static_cast<std::ptrdiff_t>(begin + length);
  out.tokens.assign(tokens.begin() + b, tokens.begin() + e);
  out.labels.assign(labels.begin() + b, labels.begin() + e);
  out.pos_ids.assign(pos_ids.begin() + b, pos_ids.begin() + e);
  out.position_mask.assign(position_mask.begin() + b, position_mask.begin() + e);
  return out;
}

void TokenSequence::append(const TokenSequence& other) {
  tokens.insert(tokens.end(), other.tokens.begin(), other.tokens.end());
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  pos_ids.insert(pos_ids.end(), other.pos_ids.begin(), other.pos_ids.end());
  position_mask.insert(position_mask.end(), other.position_mask.begin(), other.position_mask.end());
}

TokenSequence align(const SubwordVocab& vocab, std::span<const std::string> words,
                    std::span<const PunctLabel> word_labels, std::span<const int> word_pos_ids,
                    const AlignOptions& options) {
  if (words.size() != word_labels.size() || words.size() != word_pos_ids.size())
    throw LengthMismatch("align: " + std::to_string(words.size()) + " words, " +
                         std::to_string(word_labels.size()) + " labels, " +
                         std::to_string(word_pos_ids.size()) + " POS ids");
  TokenSequence out;
  auto push = [&](int token, PunctLabel label, int pos, bool tail) {
    out.tokens.push_back(token);
    out.labels.push_back(label);
    out.pos_ids.push_back(pos);
    out.position_mask.push_back(tail ? 1 : 0);
  };
  if (options.add_bos_eos) push(SubwordVocab::kBosId, PunctLabel::O, options.x_tag, false);
  for (std::size_t w = 0; w < words.size(); ++w) {
    const auto ids = tokenize_word_ids(vocab, words[w]);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const bool tail = k + 1 == ids.size();
      const int pos =
          tail || options.nontail == NontailPos::Copy ? word_pos_ids[w] : options.x_tag;
      push(ids[k], tail ? word_labels[w] : PunctLabel::O, pos, tail);
    }
  }
  if (options.add_bos_eos) push(SubwordVocab::kEosId, PunctLabel::O, options.x_tag, false);
  return out;
}

std::vector<PunctLabel> project_labels(const TokenSequence& seq) {
  std::vector<PunctLabel> out;
  for (std::size_t i = 0; i < seq.size(); ++i)
    if (seq.position_mask[i]) out.push_back(seq.labels[i]);
  return out;
}

}  // namespace punc
