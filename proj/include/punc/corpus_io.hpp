#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace punc {

/// Punctuation class that follows a word. Numeric values are the label ids
/// used by the model's output layer.
enum class PunctLabel : int { O = 0, COMMA = 1, PERIOD = 2, QUESTION = 3 };

inline constexpr int kNumLabels = 4;
inline constexpr std::array<PunctLabel, kNumLabels> kAllLabels = {
    PunctLabel::O, PunctLabel::COMMA, PunctLabel::PERIOD, PunctLabel::QUESTION};

std::string_view label_name(PunctLabel label);
std::optional<PunctLabel> parse_label(std::string_view name);

inline int label_id(PunctLabel label) { return static_cast<int>(label); }
PunctLabel label_from_id(int id);

class MalformedLine : public std::runtime_error {
 public:
  MalformedLine(std::size_t line, const std::string& why);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class UnknownMark : public std::invalid_argument {
 public:
  explicit UnknownMark(std::string mark);
};

struct CorpusEntry {
  std::string word;
  PunctLabel label = PunctLabel::O;

  bool operator==(const CorpusEntry&) const = default;
};

/// The continuous word stream: file order, no sentence boundaries.
struct LabeledCorpus {
  std::vector<CorpusEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  std::vector<std::string> words() const;
  std::vector<PunctLabel> labels() const;
};

/// Reads `word<TAB>LABEL` lines. Blank lines are skipped; anything else
/// that is not exactly one tab plus a known label throws MalformedLine with
/// the 1-based line number.
LabeledCorpus parse_tsv(std::istream& in);
LabeledCorpus parse_tsv_string(std::string_view text);
LabeledCorpus read_corpus_file(const std::string& path);

void write_tsv(std::ostream& out, const LabeledCorpus& corpus);
std::string to_tsv_string(const LabeledCorpus& corpus);

/// "," ":" "-" -> COMMA, "." "!" ";" -> PERIOD, "?" -> QUESTION,
/// no mark -> O. Anything else throws UnknownMark.
PunctLabel map_punctuation(std::optional<char> mark);

/// Converts punctuated running text into a labeled corpus. Marks attached
/// to the end of a word (or standing alone, e.g. a dash between words)
/// label the preceding word; words are lowercased. When several marks
/// follow one word the last one wins.
LabeledCorpus corpus_from_text(std::string_view text);

}  // namespace punc
