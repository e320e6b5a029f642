#include <gtest/gtest.h>

#include <sstream>

#include "punc/config.hpp"

using namespace punc;

namespace {

KeyValues minimal() { return {{"train", "t.tsv"}, {"valid", "v.tsv"}, {"vocab", "vocab.txt"}, {"tagger", "tagger.bin"}}; }

bool mentions(const ConfigError& e, const std::string& needle) {
  for (const auto& p : e.problems())
    if (p.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(KeyValues, CommentsBlankLinesAndTrimming) {
  std::stringstream in("# comment\n\n d = 32 \nsampler=fixed_split\n");
  const auto kv = parse_key_values(in);
  EXPECT_EQ(kv.size(), 2u);
  EXPECT_EQ(kv.at("d"), "32");
  EXPECT_EQ(kv.at("sampler"), "fixed_split");
  std::stringstream bad("no equals sign\n");
  EXPECT_THROW(parse_key_values(bad), ConfigError);
}

TEST(KeyValues, OverrideAndWrite) {
  KeyValues kv{{"d", "64"}};
  apply_override(kv, "d=32");
  apply_override(kv, "seed=7");
  EXPECT_EQ(kv.at("d"), "32");
  EXPECT_EQ(kv.at("seed"), "7");
  EXPECT_THROW(apply_override(kv, "oops"), ConfigError);
  std::stringstream out;
  write_key_values(out, kv);
  EXPECT_EQ(out.str(), "d=32\nseed=7\n");
}

TEST(RunConfig, DefaultsResolve) {
  const auto c = RunConfig::resolve(minimal());
  EXPECT_EQ(c.model.pos_source, PosSource::Tagger);
  EXPECT_EQ(c.train.sampler, SamplerKind::Sbs);
  EXPECT_EQ(c.model.seq_len, 256u);
  EXPECT_EQ(c.train.batch_size, 8u);
  EXPECT_DOUBLE_EQ(c.train.adam.learning_rate, 1e-3);
  EXPECT_FALSE(c.b_explicit);
}

TEST(RunConfig, EveryProblemListed) {
  KeyValues kv = {{"fusion_heads", "7"}, {"d", "abc"}, {"sampler", "random"}, {"bogus", "1"}, {"patience", "0"}};
  try {
    RunConfig::resolve(kv);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_TRUE(mentions(e, "unknown key 'bogus'"));
    EXPECT_TRUE(mentions(e, "d: expected a non-negative integer"));
    EXPECT_TRUE(mentions(e, "sampler: expected sbs|fixed_split"));
    EXPECT_TRUE(mentions(e, "must be divisible by fusion_heads=7"));
    EXPECT_TRUE(mentions(e, "train: path"));
    EXPECT_TRUE(mentions(e, "valid: path"));
    EXPECT_TRUE(mentions(e, "vocab: path"));
    EXPECT_TRUE(mentions(e, "tagger:"));
    EXPECT_TRUE(mentions(e, "patience"));
  }
}

TEST(RunConfig, NoneNeedsNoTagger) {
  auto kv = minimal();
  kv.erase("tagger");
  kv["pos_source"] = "none";
  EXPECT_NO_THROW(RunConfig::resolve(kv));
  kv["pos_source"] = "random";
  EXPECT_THROW(RunConfig::resolve(kv), ConfigError);
}

TEST(RunConfig, ManifestKeysRoundTrip) {
  auto kv = minimal();
  kv["sampler"] = "fixed_split";
  kv["dropout"] = "0.2";
  kv["seed"] = "12";
  kv["loss_mask"] = "position_mask";
  const auto c = RunConfig::resolve(kv);
  auto written = c.to_key_values();
  written["command"] = "train";
  written["version"] = "0.1.0";
  written["digest.train"] = "0123";
  const auto again = RunConfig::resolve(written);
  EXPECT_EQ(again.model, c.model);
  EXPECT_EQ(again.to_key_values(), c.to_key_values());
  EXPECT_EQ(again.model.init_seed, 12u);
}

TEST(RunConfig, KeyListIsComplete) {
  KeyValues kv;
  for (const auto& k : train_config_keys()) kv[k] = "";
  try {
    RunConfig::resolve(kv);
  } catch (const ConfigError& e) {
    EXPECT_FALSE(mentions(e, "unknown key"));
  }
}
