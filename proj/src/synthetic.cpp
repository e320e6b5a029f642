#include "punc/synthetic.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <random>
#include <utility>

namespace punc::synthetic {

namespace {

using Lexicon = std::map<std::string, std::vector<std::string>>;

const Lexicon& toy_lexicon() {
  static const Lexicon lex = {
      {"DET", {"the", "a", "this", "every", "that"}},
      {"ADJ", {"big", "small", "old", "green", "happy", "quiet", "strange", "bright"}},
      {"NOUN", {"dog", "cat", "house", "river", "teacher", "city", "book", "car", "garden", "horse",
                "puppet", "window", "story", "market"}},
      {"VERB", {"saw", "likes", "found", "built", "reads", "wants", "painted", "visited"}},
      {"VERB_BASE", {"see", "like", "find", "build", "read", "want", "paint", "visit"}},
      {"PRON", {"we", "they", "she", "he", "you", "i"}},
      {"ADV", {"today", "quickly", "often", "here", "again", "later"}},
      {"INTJ", {"well", "so", "okay", "oh"}},
      {"CCONJ", {"and", "but"}},
      {"ADP", {"about", "near", "with", "under"}},
      {"AUX", {"do", "did", "can", "will"}},
      {"WH", {"what", "where", "why", "how"}},
      {"PROPN", {"adrian", "kohler", "maria", "london", "chen", "oslo"}},
  };
  return lex;
}

struct Slot {
  const char* category;  // lexicon key
  PunctLabel label;
};

constexpr PunctLabel O = PunctLabel::O;
constexpr PunctLabel C = PunctLabel::COMMA;
constexpr PunctLabel P = PunctLabel::PERIOD;
constexpr PunctLabel Q = PunctLabel::QUESTION;

const std::vector<std::vector<Slot>>& toy_templates() {
  static const std::vector<std::vector<Slot>> t = {
      {{"DET", O}, {"ADJ", O}, {"NOUN", O}, {"VERB", O}, {"DET", O}, {"NOUN", P}},
      {{"INTJ", C}, {"PRON", O}, {"VERB", O}, {"ADP", O}, {"DET", O}, {"NOUN", P}},
      {{"WH", O}, {"AUX", O}, {"PRON", O}, {"VERB_BASE", Q}},
      {{"PRON", O}, {"VERB", O}, {"DET", O}, {"NOUN", C}, {"CCONJ", O}, {"PRON", O}, {"VERB", O}, {"ADV", P}},
      {{"AUX", O}, {"PRON", O}, {"VERB_BASE", O}, {"DET", O}, {"NOUN", Q}},
      {{"PROPN", O}, {"PROPN", C}, {"INTJ", C}, {"PRON", O}, {"VERB", O}, {"ADV", P}},
      {{"DET", O}, {"NOUN", O}, {"VERB", O}, {"ADV", P}},
      {{"PRON", O}, {"VERB", C}, {"DET", O}, {"ADJ", O}, {"NOUN", C}, {"DET", O}, {"ADJ", O}, {"NOUN", P}},
  };
  return t;
}

std::string tag_of(const std::string& category, const std::string& word) {
  if (category == "VERB_BASE") return "VERB";
  if (category == "WH") return word == "what" ? "PRON" : "ADV";
  return category;
}

template <typename Rng>
const std::string& pick(const std::vector<std::string>& v, Rng& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

std::string random_stem(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len) {
  static const std::string consonants = "bcdfghklmnprstvz";
  static const std::string vowels = "aeiou";
  const auto len = std::uniform_int_distribution<std::size_t>(min_len, max_len)(rng);
  std::string s;
  for (std::size_t i = 0; i < len; ++i) {
    const auto& pool = i % 2 == 0 ? consonants : vowels;
    s += pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
  }
  return s;
}

}  // namespace

LabeledCorpus to_corpus(const std::vector<Sentence>& sentences) {
  LabeledCorpus c;
  for (const auto& s : sentences)
    for (std::size_t i = 0; i < s.words.size(); ++i) c.entries.push_back({s.words[i], s.labels[i]});
  return c;
}

std::vector<TaggedSentence> to_tagged(const std::vector<Sentence>& sentences) {
  std::vector<TaggedSentence> out;
  for (const auto& s : sentences) out.push_back({s.words, s.tags});
  return out;
}

std::string to_text(const std::vector<Sentence>& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    for (std::size_t i = 0; i < s.words.size(); ++i) {
      if (!out.empty()) out += ' ';
      out += s.words[i];
      switch (s.labels[i]) {
        case PunctLabel::COMMA: out += ','; break;
        case PunctLabel::PERIOD: out += '.'; break;
        case PunctLabel::QUESTION: out += '?'; break;
        case PunctLabel::O: break;
      }
    }
  }
  return out + '\n';
}

std::vector<Sentence> toy_sentences(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& lex = toy_lexicon();
  const auto& templates = toy_templates();
  std::vector<Sentence> out;
  for (std::size_t n = 0; n < count; ++n) {
    const auto& tpl = templates[n % templates.size()];
    Sentence s;
    for (const auto& slot : tpl) {
      const auto& word = pick(lex.at(slot.category), rng);
      s.words.push_back(word);
      s.tags.push_back(tag_of(slot.category, word));
      s.labels.push_back(slot.label);
    }
    out.push_back(std::move(s));
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

std::vector<Sentence> suffix_tagged(std::size_t count, std::uint64_t seed) {
  static const std::array<std::pair<const char*, const char*>, 8> suffixes = {{
      {"ness", "NOUN"}, {"tion", "NOUN"}, {"ing", "VERB"}, {"ize", "VERB"},
      {"ly", "ADV"}, {"ful", "ADJ"}, {"ous", "ADJ"}, {"ed", "VERB"},
  }};
  std::mt19937_64 rng(seed);
  std::vector<Sentence> out;
  for (std::size_t n = 0; n < count; ++n) {
    Sentence s;
    const auto len = std::uniform_int_distribution<std::size_t>(4, 10)(rng);
    for (std::size_t i = 0; i < len; ++i) {
      const auto& [suffix, tag] = suffixes[std::uniform_int_distribution<std::size_t>(0, suffixes.size() - 1)(rng)];
      s.words.push_back(random_stem(rng, 2, 5) + suffix);
      s.tags.emplace_back(tag);
      s.labels.push_back(i + 1 == len ? PunctLabel::PERIOD : PunctLabel::O);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sentence> ud_style(std::size_t count, std::uint64_t seed) {
  // Tag transitions; "$" ends the sentence.
  static const std::map<std::string, std::vector<std::string>> next = {
      {"^", {"DET", "DET", "PRON", "PROPN", "ADV", "SCONJ"}},
      {"DET", {"NOUN", "NOUN", "ADJ"}},
      {"ADJ", {"NOUN", "NOUN", "CCONJ"}},
      {"NOUN", {"VERB", "VERB", "ADP", "CCONJ", "$", "AUX"}},
      {"PROPN", {"VERB", "AUX", "CCONJ"}},
      {"PRON", {"VERB", "AUX"}},
      {"AUX", {"VERB", "ADV"}},
      {"VERB", {"DET", "PRON", "ADV", "ADP", "$", "NUM"}},
      {"ADV", {"VERB", "ADJ", "$", "PRON"}},
      {"ADP", {"DET", "PROPN", "PRON", "NUM"}},
      {"NUM", {"NOUN", "NOUN"}},
      {"CCONJ", {"DET", "PRON", "ADJ", "VERB"}},
      {"SCONJ", {"PRON", "DET", "PROPN"}},
  };
  static const std::map<std::string, std::vector<std::string>> words = {
      {"DET", {"the", "a", "that", "this", "some", "every"}},
      {"NOUN", {"dog", "light", "run", "book", "water", "play", "house", "back", "time", "work", "walk",
                "idea", "train", "plant", "answer"}},
      {"ADJ", {"light", "old", "green", "back", "fast", "kind", "clear", "close"}},
      {"VERB", {"run", "book", "water", "play", "walk", "train", "plant", "answer", "saw", "work",
                "close", "clear", "like"}},
      {"PRON", {"we", "they", "that", "it", "she", "he"}},
      {"PROPN", {"adrian", "maria", "london", "oslo", "chen"}},
      {"AUX", {"will", "can", "did", "must"}},
      {"ADV", {"back", "fast", "today", "here", "close", "well"}},
      {"ADP", {"about", "near", "like", "with", "before"}},
      {"CCONJ", {"and", "but", "or"}},
      {"SCONJ", {"because", "that", "before", "if"}},
      {"NUM", {"two", "three", "ten", "one"}},
  };
  std::mt19937_64 rng(seed);
  std::vector<Sentence> out;
  for (std::size_t n = 0; n < count; ++n) {
    Sentence s;
    std::string tag = "^";
    for (std::size_t guard = 0; guard < 25; ++guard) {
      tag = pick(next.at(tag), rng);
      if (tag == "$") break;
      s.words.push_back(pick(words.at(tag), rng));
      s.tags.push_back(tag);
      s.labels.push_back(PunctLabel::O);
    }
    if (s.words.empty()) continue;
    s.labels.back() = PunctLabel::PERIOD;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sentence> pos_signal(std::size_t units, std::uint64_t seed) {
  static const std::array<std::pair<const char*, const char*>, 4> markers = {{
      {"ka", "NOUN"}, {"ki", "VERB"}, {"ko", "ADJ"}, {"ku", "ADV"}}};
  static const std::map<std::string, PunctLabel> label_of_tag = {
      {"NOUN", PunctLabel::PERIOD}, {"VERB", PunctLabel::COMMA},
      {"ADJ", PunctLabel::QUESTION}, {"ADV", PunctLabel::O}};
  static const std::vector<std::string> content = [] {
    std::mt19937_64 lex_rng(0x9e3779b9);
    std::vector<std::string> words;
    while (words.size() < 24) {
      auto w = random_stem(lex_rng, 3, 3);
      if (std::find(words.begin(), words.end(), w) == words.end()) words.push_back(std::move(w));
    }
    return words;
  }();
  std::mt19937_64 rng(seed);
  std::vector<Sentence> out;
  Sentence cur;
  for (std::size_t u = 0; u < units; ++u) {
    const auto& [marker, tag] = markers[std::uniform_int_distribution<std::size_t>(0, markers.size() - 1)(rng)];
    cur.words.emplace_back(marker);
    cur.tags.emplace_back("PART");
    cur.labels.push_back(PunctLabel::O);
    cur.words.push_back(pick(content, rng));
    cur.tags.emplace_back(tag);
    cur.labels.push_back(label_of_tag.at(tag));
    if (cur.words.size() >= 16) out.push_back(std::exchange(cur, {}));
  }
  if (!cur.words.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace punc::synthetic
