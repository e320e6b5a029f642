#include "punc/corpus_io.hpp"

#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace punc {

namespace {
constexpr std::array<std::string_view, kNumLabels> kLabelNames = {"O", "COMMA", "PERIOD",
                                                                  "QUESTION"};

bool is_mark(char c) {
  switch (c) {
    case ',':
    case ':':
    case '-':
    case '.':
    case '!':
    case ';':
    case '?':
      return true;
    default:
      return false;
  }
}
}  // namespace

std::string_view label_name(PunctLabel label) { return kLabelNames.at(label_id(label)); }

std::optional<PunctLabel> parse_label(std::string_view name) {
  for (PunctLabel l : kAllLabels) {
    if (kLabelNames[label_id(l)] == name) return l;
  }
  return std::nullopt;
}

PunctLabel label_from_id(int id) {
  if (id < 0 || id >= kNumLabels) throw std::out_of_range("label id " + std::to_string(id));
  return static_cast<PunctLabel>(id);
}

MalformedLine::MalformedLine(std::size_t line, const std::string& why)
    : std::runtime_error("malformed line " + std::to_string(line) + ": " + why), line_(line) {}

UnknownMark::UnknownMark(std::string mark)
    : std::invalid_argument("unknown punctuation mark '" + mark + "'") {}

std::vector<std::string> LabeledCorpus::words() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.word);
  return out;
}

std::vector<PunctLabel> LabeledCorpus::labels() const {
  std::vector<PunctLabel> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.label);
  return out;
}

LabeledCorpus parse_tsv(std::istream& in) {
  LabeledCorpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw MalformedLine(line_no, "expected word<TAB>LABEL");
    if (line.find('\t', tab + 1) != std::string::npos)
      throw MalformedLine(line_no, "more than one tab");
    std::string word = line.substr(0, tab);
    if (word.empty()) throw MalformedLine(line_no, "empty word");
    for (char c : word) {
      if (std::isspace(static_cast<unsigned char>(c)))
        throw MalformedLine(line_no, "whitespace inside word");
    }
    const auto label = parse_label(std::string_view(line).substr(tab + 1));
    if (!label) throw MalformedLine(line_no, "unknown label '" + line.substr(tab + 1) + "'");
    corpus.entries.push_back({std::move(word), *label});
  }
  return corpus;
}

LabeledCorpus parse_tsv_string(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_tsv(in);
}

LabeledCorpus read_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file " + path);
  return parse_tsv(in);
}

void write_tsv(std::ostream& out, const LabeledCorpus& corpus) {
  for (const auto& e : corpus.entries) out << e.word << '\t' << label_name(e.label) << '\n';
}

std::string to_tsv_string(const LabeledCorpus& corpus) {
  std::ostringstream out;
  write_tsv(out, corpus);
  return out.str();
}

PunctLabel map_punctuation(std::optional<char> mark) {
  if (!mark) return PunctLabel::O;
  switch (*mark) {
    case ',':
    case ':':
    case '-':
      return PunctLabel::COMMA;
    case '.':
    case '!':
    case ';':
      return PunctLabel::PERIOD;
    case '?':
      return PunctLabel::QUESTION;
    default:
      throw UnknownMark(std::string(1, *mark));
  }
}

LabeledCorpus corpus_from_text(std::string_view text) {
  LabeledCorpus corpus;
  std::istringstream in{std::string(text)};
  std::string token;
  while (in >> token) {
    std::size_t end = token.size();
    std::optional<char> last_mark;
    while (end > 0 && is_mark(token[end - 1])) {
      if (!last_mark) last_mark = token[end - 1];
      --end;
    }
    std::string word = token.substr(0, end);
    for (char& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (word.empty()) {
      // A standalone mark such as " - " separates the previous word.
      if (last_mark && !corpus.entries.empty())
        corpus.entries.back().label = map_punctuation(last_mark);
      continue;
    }
    corpus.entries.push_back({std::move(word), map_punctuation(last_mark)});
  }
  return corpus;
}

}  // namespace punc
