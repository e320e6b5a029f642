#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "punc/corpus_io.hpp"
#include "punc/pos_tagger.hpp"

namespace punc::synthetic {

/// A generated sentence with gold POS tags and punctuation labels.
struct Sentence {
  std::vector<std::string> words;
  std::vector<std::string> tags;
  std::vector<PunctLabel> labels;
};

LabeledCorpus to_corpus(const std::vector<Sentence>& sentences);
std::vector<TaggedSentence> to_tagged(const std::vector<Sentence>& sentences);
/// Punctuated running text ("well, we talk here.") for restore demos.
std::string to_text(const std::vector<Sentence>& sentences);

/// Short English-like sentences from a handful of templates covering
/// commas, colons, full stops, semicolons and questions.
std::vector<Sentence> toy_sentences(std::size_t count, std::uint64_t seed);

/// Words are random stems plus a suffix that determines the tag.
std::vector<Sentence> suffix_tagged(std::size_t count, std::uint64_t seed);

/// Tag-bigram grammar over a lexicon in which many words carry several
/// tags; context is needed to disambiguate.
std::vector<Sentence> ud_style(std::size_t count, std::uint64_t seed);

/// Units of a marker word followed by a content word. Content words are
/// shared by every tag; the marker fixes the content word's tag and the tag
/// fixes its punctuation label.
std::vector<Sentence> pos_signal(std::size_t units, std::uint64_t seed);

}  // namespace punc::synthetic
