#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "punc/synthetic.hpp"
#include "punc/tokenizer.hpp"

using namespace punc;

namespace {

constexpr PunctLabel O = PunctLabel::O;
constexpr PunctLabel C = PunctLabel::COMMA;
constexpr PunctLabel P = PunctLabel::PERIOD;

std::vector<std::string> pieces_of(const SubwordVocab& v, const TokenSequence& s) {
  std::vector<std::string> out;
  for (int t : s.tokens) out.push_back(v.piece(t));
  return out;
}

}  // namespace

TEST(Vocab, SpecialsComeFirst) {
  const auto v = SubwordVocab::from_pieces({"a", "##b"});
  ASSERT_EQ(v.size(), 5u);
  EXPECT_EQ(v.id("<bos>"), 0);
  EXPECT_EQ(v.id("<eos>"), 1);
  EXPECT_EQ(v.id("<unk>"), 2);
  EXPECT_EQ(v.id("##b"), 4);
  EXPECT_FALSE(v.id("b").has_value());
}

TEST(Vocab, IdsAreABijection) {
  std::vector<std::string> words;
  for (const auto& s : synthetic::toy_sentences(200, 1))
    words.insert(words.end(), s.words.begin(), s.words.end());
  const auto v = train_vocab(words, 120);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v.id(v.piece(static_cast<int>(i))), static_cast<int>(i));
}

TEST(Vocab, SaveLoadRoundTrip) {
  const auto v = SubwordVocab::from_pieces({"ko", "##hler", "we"});
  std::stringstream ss;
  v.save(ss);
  EXPECT_EQ(ss.str().substr(0, 11), "#punc-vocab");
  EXPECT_EQ(SubwordVocab::load(ss), v);
  std::stringstream bad("not a vocab\n");
  EXPECT_THROW(SubwordVocab::load(bad), std::runtime_error);
}

TEST(TrainVocab, MostFrequentPairMergesFirst) {
  const std::vector<std::string> words(100, "aa");
  const auto v = train_vocab(words, 5 + 1);
  // Base symbols: "a" and "##a"; one merge produces "aa".
  EXPECT_TRUE(v.contains("aa"));
  EXPECT_EQ(v.size(), 6u);
  EXPECT_EQ(tokenize_word(v, "aa"), std::vector<std::string>{"aa"});
}

TEST(TrainVocab, DistinctSingleCharWordsMakeNoMerges) {
  const auto v = train_vocab(std::vector<std::string>{"a", "b", "c", "d"}, 100);
  EXPECT_EQ(v.size(), 7u);
}

TEST(TrainVocab, TooSmallIsRejected) {
  EXPECT_THROW(train_vocab(std::vector<std::string>{"abc"}, 4), VocabTooSmall);
}

TEST(TrainVocab, Deterministic) {
  std::vector<std::string> words;
  for (const auto& s : synthetic::ud_style(300, 4)) words.insert(words.end(), s.words.begin(), s.words.end());
  EXPECT_EQ(train_vocab(words, 150), train_vocab(words, 150));
}

TEST(TrainVocab, TiesBreakLexicographically) {
  // "ab" and "cd" both occur twice; the smaller pair string merges first.
  const auto v = train_vocab(std::vector<std::string>{"ab", "ab", "cd", "cd"}, 3 + 4 + 1);
  EXPECT_TRUE(v.contains("ab"));
  EXPECT_FALSE(v.contains("cd"));
}

TEST(TrainVocab, HeldOutCoverage) {
  std::vector<std::string> train_words, valid_words;
  for (const auto& s : synthetic::suffix_tagged(3000, 1)) train_words.insert(train_words.end(), s.words.begin(), s.words.end());
  for (const auto& s : synthetic::suffix_tagged(500, 2)) valid_words.insert(valid_words.end(), s.words.begin(), s.words.end());
  const auto v = train_vocab(train_words, 400);
  std::size_t pieces = 0, unk = 0;
  for (const auto& w : valid_words)
    for (int id : tokenize_word_ids(v, w)) {
      ++pieces;
      unk += id == SubwordVocab::kUnkId;
    }
  EXPECT_GE(1.0 - static_cast<double>(unk) / static_cast<double>(pieces), 0.999);
}

TEST(Tokenize, ContinuationPieces) {
  const auto v = SubwordVocab::from_pieces({"k", "ko", "##h", "##hler", "##l", "##e", "##r", "we"});
  EXPECT_EQ(tokenize_word(v, "kohler"), (std::vector<std::string>{"ko", "##hler"}));
  EXPECT_EQ(tokenize_word(v, "we"), std::vector<std::string>{"we"});
}

TEST(Tokenize, UnseenCharactersBecomeUnk) {
  const auto v = SubwordVocab::from_pieces({"a", "##b"});
  EXPECT_EQ(tokenize_word_ids(v, "a\xc3\xa9" "b"),
            (std::vector<int>{*v.id("a"), SubwordVocab::kUnkId, *v.id("##b")}));
  EXPECT_EQ(tokenize_word_ids(v, "b"), std::vector<int>{SubwordVocab::kUnkId});
}

TEST(Tokenize, StripAndConcatRoundTrip) {
  std::mt19937_64 rng(8);
  std::vector<std::string> train_words;
  auto random_word = [&] {
    std::string w;
    const auto n = std::uniform_int_distribution<int>(1, 10)(rng);
    for (int i = 0; i < n; ++i) w += static_cast<char>('a' + std::uniform_int_distribution<int>(0, 25)(rng));
    return w;
  };
  for (int i = 0; i < 2000; ++i) train_words.push_back(random_word());
  const auto v = train_vocab(train_words, 300);
  for (int i = 0; i < 1000; ++i) {
    const auto w = random_word();
    EXPECT_EQ(detokenize_word(tokenize_word(v, w)), w);
  }
}

TEST(Align, KohlerExample) {
  const auto v = SubwordVocab::from_pieces({"ko", "##hler"});
  const std::vector<std::string> words = {"kohler"};
  const std::vector<PunctLabel> labels = {C};
  const int propn = 11, x = 16;
  const auto s = align(v, words, labels, std::vector<int>{propn}, AlignOptions{NontailPos::Copy, x, true});
  EXPECT_EQ(pieces_of(v, s), (std::vector<std::string>{"<bos>", "ko", "##hler", "<eos>"}));
  EXPECT_EQ(s.labels, (std::vector<PunctLabel>{O, O, C, O}));
  EXPECT_EQ(s.pos_ids, (std::vector<int>{x, propn, propn, x}));
  EXPECT_EQ(s.position_mask, (std::vector<std::uint8_t>{0, 0, 1, 0}));
}

TEST(Align, SinglePieceWordIsItsOwnTail) {
  const auto v = SubwordVocab::from_pieces({"we"});
  const std::vector<std::string> words = {"we"};
  const auto s = align(v, words, std::vector<PunctLabel>{O}, std::vector<int>{3}, AlignOptions{NontailPos::Copy, 16, true});
  EXPECT_EQ(s.position_mask, (std::vector<std::uint8_t>{0, 1, 0}));
}

TEST(Align, AdrianSentenceMatchesTable) {
  const std::vector<std::string> words = {"adrian", "kohler", "well", "we", "'re", "here", "today",
                                          "to", "talk", "about", "the", "puppet", "horse"};
  const std::vector<PunctLabel> labels = {O, C, C, O, O, O, O, O, O, O, O, O, P};
  const std::vector<std::string> tags = {"PROPN", "PROPN", "INTJ", "PRON", "VERB", "ADV", "NOUN",
                                         "PART",  "VERB",  "ADP",  "DET",  "NOUN", "NOUN"};
  std::vector<std::string> pieces = {"ko", "##hler", "'", "##re"};
  for (const auto& w : words)
    if (w != "kohler" && w != "'re") pieces.push_back(w);
  const auto v = SubwordVocab::from_pieces(pieces);
  const auto tagset = PosTagset::universal();
  std::vector<int> ids;
  for (const auto& t : tags) ids.push_back(*tagset.id(t));

  const auto s = align(v, words, labels, ids, AlignOptions{NontailPos::X, tagset.x_id(), true});
  EXPECT_EQ(pieces_of(v, s),
            (std::vector<std::string>{"<bos>", "adrian", "ko", "##hler", "well", "we", "'", "##re", "here", "today",
                                      "to", "talk", "about", "the", "puppet", "horse", "<eos>"}));
  EXPECT_EQ(s.labels, (std::vector<PunctLabel>{O, O, O, C, C, O, O, O, O, O, O, O, O, O, O, P, O}));
  EXPECT_EQ(s.position_mask, (std::vector<std::uint8_t>{0, 1, 0, 1, 1, 1, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0}));
  std::vector<std::string> pos_row;
  for (int id : s.pos_ids) pos_row.push_back(tagset.name(id));
  EXPECT_EQ(pos_row, (std::vector<std::string>{"X", "PROPN", "X", "PROPN", "INTJ", "PRON", "X", "VERB", "ADV", "NOUN",
                                               "PART", "VERB", "ADP", "DET", "NOUN", "NOUN", "X"}));

  const auto copy = align(v, words, labels, ids, AlignOptions{NontailPos::Copy, tagset.x_id(), true});
  EXPECT_EQ(copy.labels, s.labels);
  EXPECT_EQ(copy.position_mask, s.position_mask);
  EXPECT_EQ(tagset.name(copy.pos_ids[2]), "PROPN");
  EXPECT_EQ(tagset.name(copy.pos_ids[6]), "VERB");
}

TEST(Align, LengthMismatchThrows) {
  const auto v = SubwordVocab::from_pieces({"a"});
  const std::vector<std::string> words = {"a", "a"};
  EXPECT_THROW(align(v, words, std::vector<PunctLabel>{O}, std::vector<int>{0, 0}, {}), LengthMismatch);
}

TEST(Align, InvariantsOnRandomInput) {
  std::vector<std::string> corpus_words;
  for (const auto& s : synthetic::ud_style(200, 9)) corpus_words.insert(corpus_words.end(), s.words.begin(), s.words.end());
  const auto v = train_vocab(corpus_words, 80);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = std::uniform_int_distribution<std::size_t>(0, 30)(rng);
    std::vector<std::string> words;
    std::vector<PunctLabel> labels;
    std::vector<int> pos;
    for (std::size_t i = 0; i < n; ++i) {
      words.push_back(corpus_words[std::uniform_int_distribution<std::size_t>(0, corpus_words.size() - 1)(rng)]);
      labels.push_back(label_from_id(std::uniform_int_distribution<int>(0, 3)(rng)));
      pos.push_back(std::uniform_int_distribution<int>(0, 15)(rng));
    }
    const auto s = align(v, words, labels, pos, AlignOptions{NontailPos::Copy, 16, true});
    ASSERT_EQ(s.labels.size(), s.size());
    ASSERT_EQ(s.pos_ids.size(), s.size());
    ASSERT_EQ(s.position_mask.size(), s.size());
    EXPECT_EQ(s.tokens.front(), SubwordVocab::kBosId);
    EXPECT_EQ(s.tokens.back(), SubwordVocab::kEosId);
    EXPECT_EQ(s.pos_ids.front(), 16);
    EXPECT_EQ(s.pos_ids.back(), 16);
    std::size_t tails = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      tails += s.position_mask[i];
      if (s.labels[i] != O) {
        EXPECT_EQ(s.position_mask[i], 1);
      }
    }
    EXPECT_EQ(tails, n);
    EXPECT_EQ(project_labels(s), labels);
  }
}

TEST(TokenSequence, SliceAndAppend) {
  const auto v = SubwordVocab::from_pieces({"a", "b"});
  const std::vector<std::string> words = {"a", "b"};
  const auto s = align(v, words, std::vector<PunctLabel>{O, P}, std::vector<int>{1, 2}, {});
  const auto head = s.slice(0, 2);
  auto joined = head;
  joined.append(s.slice(2, 2));
  EXPECT_EQ(joined, s);
  EXPECT_THROW(s.slice(3, 2), std::out_of_range);
}
