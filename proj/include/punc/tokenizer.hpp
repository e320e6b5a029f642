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

#include "punc/corpus_io.hpp"

namespace punc {

class VocabTooSmall : public std::invalid_argument {
 public:
  VocabTooSmall(std::size_t requested, std::size_t required);
};

class LengthMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Splits a UTF-8 string into code points (invalid bytes become single-byte
/// characters).
std::vector<std::string_view> utf8_chars(std::string_view s);

/// Byte-pair vocabulary using the "##" continuation convention: a piece that
/// starts a word is stored bare, a piece that continues a word carries the
/// prefix. Ids 0, 1, 2 are BOS, EOS, UNK.
class SubwordVocab {
 public:
  static constexpr std::string_view kPrefix = "##";
  static constexpr std::string_view kBos = "<bos>";
  static constexpr std::string_view kEos = "<eos>";
  static constexpr std::string_view kUnk = "<unk>";
  static constexpr int kBosId = 0;
  static constexpr int kEosId = 1;
  static constexpr int kUnkId = 2;

  SubwordVocab();
  /// Builds a vocabulary from ordinary pieces; the specials are prepended.
  static SubwordVocab from_pieces(const std::vector<std::string>& pieces);

  std::size_t size() const { return pieces_.size(); }
  const std::vector<std::string>& pieces() const { return pieces_; }
  const std::string& piece(int id) const { return pieces_.at(static_cast<std::size_t>(id)); }
  std::optional<int> id(std::string_view piece) const;
  bool contains(std::string_view piece) const { return id(piece).has_value(); }

  /// Appends a piece if absent; returns its id.
  int add(std::string piece);

  void save(std::ostream& out) const;
  static SubwordVocab load(std::istream& in);
  void save_file(const std::string& path) const;
  static SubwordVocab load_file(const std::string& path);

  bool operator==(const SubwordVocab& other) const { return pieces_ == other.pieces_; }

 private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> index_;
  std::size_t max_piece_bytes_ = 0;

  friend std::vector<int> tokenize_word_ids(const SubwordVocab&, std::string_view);
};

/// Byte-pair merge training. Pairs must occur at least twice to merge; ties
/// on frequency go to the lexicographically smallest (left, right) pair.
/// Stops early when no pair is left to merge.
SubwordVocab train_vocab(const LabeledCorpus& corpus, std::size_t vocab_size);
SubwordVocab train_vocab(const std::vector<std::string>& words, std::size_t vocab_size);

/// Greedy longest-match-first segmentation. Characters no piece covers map
/// to UNK one code point at a time.
std::vector<std::string> tokenize_word(const SubwordVocab& vocab, std::string_view word);
std::vector<int> tokenize_word_ids(const SubwordVocab& vocab, std::string_view word);

/// Strips continuation prefixes and concatenates.
std::string detokenize_word(std::span<const std::string> pieces);

/// How POS ids are assigned to the non-tail pieces of a word.
enum class NontailPos { Copy, X };

/// Parallel per-token sequences; a TokenStream for a whole corpus or a
/// TokenizedSample for one model input.
struct TokenSequence {
  std::vector<int> tokens;
  std::vector<PunctLabel> labels;
  std::vector<int> pos_ids;
  std::vector<std::uint8_t> position_mask;

  std::size_t size() const { return tokens.size(); }
  TokenSequence slice(std::size_t begin, std::size_t length) const;
  void append(const TokenSequence& other);
  bool operator==(const TokenSequence&) const = default;
};

using TokenStream = TokenSequence;
using TokenizedSample = TokenSequence;

struct AlignOptions {
  NontailPos nontail = NontailPos::Copy;
  int x_tag = 0;  // POS id written on BOS/EOS (and on non-tail pieces under NontailPos::X)
  bool add_bos_eos = true;
};

/// Tokenizes words and aligns labels/POS ids to pieces: only the tail piece
/// of a word keeps its label and has mask 1.
TokenSequence align(const SubwordVocab& vocab, std::span<const std::string> words,
                    std::span<const PunctLabel> word_labels, std::span<const int> word_pos_ids,
                    const AlignOptions& options);

/// Reads back the word-level labels from the tail pieces (mask = 1).
std::vector<PunctLabel> project_labels(const TokenSequence& seq);

}  // namespace punc
