#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "punc/corpus_io.hpp"
#include "punc/model.hpp"
#include "punc/pos_tagger.hpp"
#include "punc/tokenizer.hpp"

namespace punc::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kConfigError = 2, kDataError = 3, kNumericError = 4 };

/// Entry point for the `punc` tool; returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Tags the word stream (tags from `tagger`, or X everywhere without one)
/// and aligns it into one token stream with a single BOS/EOS pair.
TokenStream make_stream(const std::vector<std::string>& words, const std::vector<PunctLabel>& labels,
                        const SubwordVocab& vocab, const PosTagger* tagger, NontailPos nontail);

/// Predicted punctuation appended to each word; words themselves untouched.
std::string restore_words(const FusionModel<float>& model, const SubwordVocab& vocab, const PosTagger* tagger,
                          const std::vector<std::string>& words);

/// FNV-1a 64-bit digest of a file's bytes, as 16 hex digits.
std::string file_digest(const std::string& path);

}  // namespace punc::cli
