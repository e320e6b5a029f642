#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "punc/pos_tagger.hpp"
#include "punc/synthetic.hpp"

using namespace punc;

TEST(Tagset, UniversalWithReservedSlots) {
  const auto t = PosTagset::universal();
  EXPECT_EQ(t.size(), 20u);
  for (const char* tag : {"ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM", "PART", "PRON", "PROPN",
                          "PUNCT", "SCONJ", "SYM", "VERB", "X"})
    EXPECT_TRUE(t.id(tag).has_value()) << tag;
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(t.id(t.name(static_cast<int>(i))), static_cast<int>(i));
  EXPECT_EQ(PosTagset::universal(18).size(), 18u);
  EXPECT_THROW(PosTagset::universal(17), std::invalid_argument);
}

TEST(TaggedTsv, SentencesSplitOnBlankLines) {
  std::stringstream in("the\tDET\ndog\tNOUN\n\nran\tVERB\n");
  const auto s = parse_tagged_tsv(in);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].words, (std::vector<std::string>{"the", "dog"}));
  EXPECT_EQ(s[1].tags, std::vector<std::string>{"VERB"});
  std::stringstream out;
  write_tagged_tsv(out, s);
  std::stringstream again(out.str());
  EXPECT_EQ(parse_tagged_tsv(again)[1].words, s[1].words);
}

TEST(Tagger, MemorizesSingleSentence) {
  const std::vector<TaggedSentence> one = {{{"the", "old", "dog", "ran", "home", "quickly"},
                                            {"DET", "ADJ", "NOUN", "VERB", "NOUN", "ADV"}}};
  TaggerConfig cfg;
  cfg.epochs = 200;
  const auto t = train_tagger(one, cfg);
  EXPECT_DOUBLE_EQ(tag_accuracy(t, one), 1.0);
}

TEST(Tagger, SuffixRuleGeneralizes) {
  const auto train = synthetic::to_tagged(synthetic::suffix_tagged(1500, 1));
  const auto held = synthetic::to_tagged(synthetic::suffix_tagged(300, 2));
  TaggerConfig cfg;
  cfg.epochs = 5;
  EXPECT_GE(tag_accuracy(train_tagger(train, cfg), held), 0.99);
}

TEST(Tagger, UdStyleHeldOut) {
  const auto train = synthetic::to_tagged(synthetic::ud_style(2000, 1));
  const auto held = synthetic::to_tagged(synthetic::ud_style(600, 2));
  std::size_t tokens = 0;
  for (const auto& s : train) tokens += s.words.size();
  EXPECT_GE(tokens, 8000u);
  TaggerConfig cfg;
  cfg.epochs = 8;
  EXPECT_GE(tag_accuracy(train_tagger(train, cfg), held), 0.85);
}

TEST(Tagger, PredictionsAreOwnArgmax) {
  const auto train = synthetic::to_tagged(synthetic::toy_sentences(500, 1));
  const auto t = train_tagger(train, {});
  const std::vector<std::string> words = {"the"};
  const auto p = t.probabilities(words, 0);
  EXPECT_EQ(t.predict_tags(words)[0], std::max_element(p.begin(), p.end()) - p.begin());
  EXPECT_EQ(t.tagset().name(t.predict_tags(words)[0]), "DET");
  EXPECT_TRUE(t.predict_tags({}).empty());
  double sum = 0;
  for (double v : p) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-9);
}

TEST(Tagger, AdrianSentenceTagShape) {
  const auto t = train_tagger(synthetic::to_tagged(synthetic::toy_sentences(500, 1)), {});
  const std::vector<std::string> words = {"adrian", "kohler", "well", "we", "'re", "here", "today",
                                          "to", "talk", "about", "the", "puppet", "horse"};
  const auto tags = t.predict_tags(words);
  ASSERT_EQ(tags.size(), words.size());
  for (int id : tags) EXPECT_LT(static_cast<std::size_t>(id), t.tagset().size());
}

TEST(Tagger, UnknownTagRejected) {
  const std::vector<TaggedSentence> bad = {{{"x"}, {"NOTATAG"}}};
  EXPECT_THROW(train_tagger(bad, {}), UnknownTag);
}

TEST(Tagger, DeterministicAndFinite) {
  const auto data = synthetic::to_tagged(synthetic::toy_sentences(100, 3));
  TaggerConfig cfg;
  cfg.seed = 4;
  const auto a = train_tagger(data, cfg);
  const auto b = train_tagger(data, cfg);
  EXPECT_EQ(a.softmax_weights(), b.softmax_weights());
  for (float v : a.softmax_weights().flat()) EXPECT_TRUE(std::isfinite(v));
  EXPECT_EQ(a.softmax_weights().rows(), cfg.b);
  EXPECT_EQ(a.softmax_weights().cols(), cfg.e);
  cfg.seed = 5;
  EXPECT_NE(train_tagger(data, cfg).softmax_weights(), a.softmax_weights());
}

TEST(Tagger, SaveLoadRoundTrip) {
  const auto t = train_tagger(synthetic::to_tagged(synthetic::toy_sentences(50, 3)), {});
  std::stringstream ss;
  t.save(ss);
  EXPECT_EQ(PosTagger::load(ss), t);
  std::stringstream bad("garbage");
  EXPECT_THROW(PosTagger::load(bad), std::runtime_error);
}

TEST(PosEmbed, IdentityLookup) {
  Matrix<float> W(2, 2);
  W(0, 0) = 1;
  W(1, 1) = 1;
  const std::vector<int> ids = {0, 1};
  const auto E = pos_embed(W, std::span<const int>(ids));
  EXPECT_EQ(E, W);
}

TEST(PosEmbed, RowsAreColumnsBitExact) {
  std::mt19937_64 rng(1);
  Matrix<float> W(4, 3);
  fill_normal(W, 1.0, rng);
  const std::vector<int> ids = {2, 2, 0};
  const auto E = pos_embed(W, std::span<const int>(ids));
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t r = 0; r < 4; ++r) EXPECT_EQ(E(i, r), W(r, static_cast<std::size_t>(ids[i])));
  EXPECT_EQ(std::vector<float>(E.row(0).begin(), E.row(0).end()), std::vector<float>(E.row(1).begin(), E.row(1).end()));
  const std::vector<int> bad = {3};
  EXPECT_THROW(pos_embed(W, std::span<const int>(bad)), IdOutOfRange);
}

TEST(PosEmbed, FullScaleShape) {
  Matrix<float> W(512, 20);
  const std::vector<int> ids(256, 7);
  const auto E = pos_embed(W, std::span<const int>(ids));
  EXPECT_EQ(E.rows(), 256u);
  EXPECT_EQ(E.cols(), 512u);
}
