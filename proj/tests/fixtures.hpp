#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "punc/cli.hpp"
#include "punc/config.hpp"
#include "punc/corpus_io.hpp"
#include "punc/model.hpp"
#include "punc/pos_tagger.hpp"
#include "punc/synthetic.hpp"
#include "punc/tokenizer.hpp"

namespace punc::fixtures {

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("punc-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline KeyValues parse_manifest(const std::string& path) { return read_config_file(path); }

/// Vocabulary, tagger and aligned token streams for a generated corpus.
struct Pipeline {
  SubwordVocab vocab;
  PosTagger tagger;
  TokenStream train;
  TokenStream valid;
};

inline Pipeline build_pipeline(const std::vector<synthetic::Sentence>& train_sentences,
                               const std::vector<synthetic::Sentence>& valid_sentences,
                               const std::vector<TaggedSentence>& tagger_data, std::size_t vocab_size,
                               const TaggerConfig& tagger_cfg, NontailPos nontail = NontailPos::Copy) {
  Pipeline p;
  const auto train_corpus = synthetic::to_corpus(train_sentences);
  const auto valid_corpus = synthetic::to_corpus(valid_sentences);
  p.vocab = train_vocab(train_corpus, vocab_size);
  p.tagger = train_tagger(tagger_data, tagger_cfg);
  p.train = cli::make_stream(train_corpus.words(), train_corpus.labels(), p.vocab, &p.tagger, nontail);
  p.valid = cli::make_stream(valid_corpus.words(), valid_corpus.labels(), p.vocab, &p.tagger, nontail);
  return p;
}

}  // namespace punc::fixtures
