#include "punc/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "punc/config.hpp"
#include "punc/eval.hpp"
#include "punc/sampler.hpp"
#include "punc/trainer.hpp"

namespace punc::cli {

namespace fs = std::filesystem;

namespace {

/// Raised for unreadable/malformed inputs; maps to exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = ".";
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "flat key=value config file");
  cmd->add_option("--set", o.overrides, "key=value override (repeatable)");
  cmd->add_option("--out-dir", o.out_dir, "directory for artifacts and the run manifest");
}

/// File values, then alias flags, then --set overrides.
KeyValues merge_config(const CommonOptions& o, const KeyValues& aliases) {
  KeyValues kv;
  if (!o.config_path.empty()) kv = read_config_file(o.config_path);
  for (const auto& [k, v] : aliases)
    if (!v.empty()) kv[k] = v;
  for (const auto& s : o.overrides) apply_override(kv, s);
  return kv;
}

std::string required(const KeyValues& kv, const std::string& key, std::vector<std::string>& problems) {
  auto it = kv.find(key);
  if (it == kv.end() || it->second.empty()) {
    problems.push_back(key + " is required");
    return {};
  }
  return it->second;
}

void reject_unknown(const KeyValues& kv, const std::vector<std::string>& allowed, std::vector<std::string>& problems) {
  for (const auto& [k, v] : kv) {
    if (k == "command" || k == "version" || k == "out_dir" || k.rfind("digest.", 0) == 0) continue;
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) problems.push_back("unknown key '" + k + "'");
  }
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir + ": " + ec.message());
}

/// Resolved keys plus digests of the listed input files.
void write_manifest(const std::string& out_dir, const std::string& command, KeyValues kv,
                    const std::vector<std::string>& input_keys) {
  kv["command"] = command;
  kv["version"] = kVersion;
  for (const auto& key : input_keys) {
    auto it = kv.find(key);
    if (it != kv.end() && !it->second.empty()) kv["digest." + key] = file_digest(it->second);
  }
  const auto path = (fs::path(out_dir) / (command + ".manifest")).string();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path);
  out << "# punc run manifest; replay with: punc " << command << " --config <this file>\n";
  write_key_values(out, kv);
}

template <typename F>
auto load_data(const std::string& what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const DimensionMismatch& e) {
    throw DataError(e.what());
  } catch (const std::exception& e) {
    throw DataError(what + ": " + e.what());
  }
}

std::size_t parse_size(const KeyValues& kv, const std::string& key, std::size_t fallback,
                       std::vector<std::string>& problems) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    problems.push_back(key + ": expected a non-negative integer, got '" + it->second + "'");
    return fallback;
  }
}

double parse_real(const KeyValues& kv, const std::string& key, double fallback, std::vector<std::string>& problems) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t used = 0;
    const auto v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    problems.push_back(key + ": expected a number, got '" + it->second + "'");
    return fallback;
  }
}

// ---------------------------------------------------------------------------

int cmd_train_vocab(const CommonOptions& o, const KeyValues& aliases, std::ostream& out) {
  KeyValues kv = merge_config(o, aliases);
  std::vector<std::string> problems;
  reject_unknown(kv, {"corpus", "vocab_size", "out"}, problems);
  const auto corpus_path = required(kv, "corpus", problems);
  const auto vocab_size = parse_size(kv, "vocab_size", 8000, problems);
  if (!problems.empty()) throw ConfigError(problems);
  ensure_dir(o.out_dir);
  if (!kv.contains("out")) kv["out"] = (fs::path(o.out_dir) / "vocab.txt").string();
  kv["vocab_size"] = std::to_string(vocab_size);

  const auto corpus = load_data("corpus " + corpus_path, [&] { return read_corpus_file(corpus_path); });
  write_manifest(o.out_dir, "train-vocab", kv, {"corpus"});
  SubwordVocab vocab;
  try {
    vocab = train_vocab(corpus, vocab_size);
  } catch (const VocabTooSmall& e) {
    throw ConfigError({e.what()});
  }
  load_data("vocab output", [&] {
    vocab.save_file(kv["out"]);
    return 0;
  });
  out << "wrote " << vocab.size() << " pieces to " << kv["out"] << '\n';
  return kOk;
}

int cmd_train_tagger(const CommonOptions& o, const KeyValues& aliases, std::ostream& out) {
  KeyValues kv = merge_config(o, aliases);
  std::vector<std::string> problems;
  reject_unknown(kv, {"tagged_corpus", "heldout", "out", "b", "e", "tagger_buckets", "tagger_epochs", "tagger_lr", "seed"},
                 problems);
  const auto corpus_path = required(kv, "tagged_corpus", problems);
  TaggerConfig tc;
  tc.b = parse_size(kv, "b", tc.b, problems);
  tc.e = parse_size(kv, "e", tc.e, problems);
  tc.buckets = parse_size(kv, "tagger_buckets", tc.buckets, problems);
  tc.epochs = parse_size(kv, "tagger_epochs", tc.epochs, problems);
  tc.learning_rate = parse_real(kv, "tagger_lr", tc.learning_rate, problems);
  tc.seed = parse_size(kv, "seed", 0, problems);
  if (tc.b < 1) problems.push_back("b must be >= 1");
  if (tc.e < 18) problems.push_back("e must be >= 18 (17 universal tags plus at least one reserved slot)");
  if (tc.buckets < 1) problems.push_back("tagger_buckets must be >= 1");
  if (!problems.empty()) throw ConfigError(problems);
  ensure_dir(o.out_dir);
  if (!kv.contains("out")) kv["out"] = (fs::path(o.out_dir) / "tagger.bin").string();

  const auto corpus = load_data("tagged corpus " + corpus_path, [&] { return read_tagged_file(corpus_path); });
  std::vector<TaggedSentence> heldout;
  if (kv.contains("heldout"))
    heldout = load_data("held-out corpus", [&] { return read_tagged_file(kv["heldout"]); });
  write_manifest(o.out_dir, "train-tagger", kv, {"tagged_corpus", "heldout"});
  PosTagger tagger;
  try {
    tagger = train_tagger(corpus, tc);
  } catch (const UnknownTag& e) {
    throw DataError(e.what());
  }
  load_data("tagger output", [&] {
    tagger.save_file(kv["out"]);
    return 0;
  });
  out << "train accuracy\t" << 100.0 * tag_accuracy(tagger, corpus) << '\n';
  if (!heldout.empty()) out << "held-out accuracy\t" << 100.0 * tag_accuracy(tagger, heldout) << '\n';
  out << "wrote tagger (b=" << tc.b << ", e=" << tc.e << ") to " << kv["out"] << '\n';
  return kOk;
}

int cmd_train(const CommonOptions& o, const KeyValues& aliases, std::ostream& out) {
  KeyValues kv = merge_config(o, aliases);
  RunConfig rc = RunConfig::resolve(kv);
  ensure_dir(o.out_dir);

  const auto vocab = load_data("vocab " + rc.vocab_path, [&] { return SubwordVocab::load_file(rc.vocab_path); });
  std::optional<PosTagger> tagger;
  if (!rc.tagger_path.empty())
    tagger = load_data("tagger " + rc.tagger_path, [&] { return PosTagger::load_file(rc.tagger_path); });
  rc.model.vocab_size = vocab.size();
  if (tagger && rc.model.uses_pos()) {
    std::vector<std::string> problems;
    const auto tb = tagger->hidden_size(), te = tagger->tagset().size();
    if (rc.b_explicit && rc.model.b != tb)
      problems.push_back("b=" + std::to_string(rc.model.b) + " conflicts with the tagger's hidden size " + std::to_string(tb));
    if (rc.e_explicit && rc.model.e != te)
      problems.push_back("e=" + std::to_string(rc.model.e) + " conflicts with the tagger's tagset size " + std::to_string(te));
    rc.model.b = tb;
    rc.model.e = te;
    for (auto& p : rc.model.validate()) problems.push_back(p);
    if (!problems.empty()) throw ConfigError(problems);
  }

  write_manifest(o.out_dir, "train", rc.to_key_values(), {"train", "valid", "vocab", "tagger"});

  const auto train_corpus = load_data("train corpus " + rc.train_path, [&] { return read_corpus_file(rc.train_path); });
  const auto valid_corpus = load_data("valid corpus " + rc.valid_path, [&] { return read_corpus_file(rc.valid_path); });
  const PosTagger* tag_ptr = tagger ? &*tagger : nullptr;
  const auto train_stream = make_stream(train_corpus.words(), train_corpus.labels(), vocab, tag_ptr, rc.model.nontail_pos);
  const auto valid_stream = make_stream(valid_corpus.words(), valid_corpus.labels(), vocab, tag_ptr, rc.model.nontail_pos);
  if (train_stream.size() < rc.model.seq_len)
    throw DataError(StreamTooShort(train_stream.size(), rc.model.seq_len).what());

  FusionModel<float> model(rc.model);
  if (rc.model.pos_source == PosSource::Tagger) model.set_pos_embedding(tagger->softmax_weights());

  const auto log_path = (fs::path(o.out_dir) / "train.log").string();
  std::ofstream log(log_path);
  if (!log) throw DataError("cannot write " + log_path);
  out << "train stream " << train_stream.size() << " tokens, " << epoch_sample_count(train_stream.size(), rc.model.seq_len)
      << " windows/epoch; model has " << model.params().parameter_count() << " parameters\n";
  auto result = train_run(rc.train, std::move(model), train_stream, valid_stream, [&](const EpochLog& e) {
    const auto line = format_epoch_log(e);
    log << line << '\n';
    log.flush();
    out << line << '\n';
    return true;
  });
  const auto ckpt = (fs::path(o.out_dir) / "model.bin").string();
  load_data("checkpoint output", [&] {
    result.best_model.save_file(ckpt);
    vocab.save_file((fs::path(o.out_dir) / "vocab.txt").string());
    if (tagger) tagger->save_file((fs::path(o.out_dir) / "tagger.bin").string());
    return 0;
  });
  const auto report = make_report(evaluate_stream(result.best_model, valid_stream).counts);
  out << "best val_loss " << result.best_val_loss << "; checkpoint " << ckpt << '\n' << render_report(report);
  return kOk;
}

struct LoadedRun {
  FusionModel<float> model;
  SubwordVocab vocab;
  std::optional<PosTagger> tagger;
};

LoadedRun load_run(KeyValues& kv, std::vector<std::string>& problems) {
  const auto ckpt = required(kv, "checkpoint", problems);
  if (!problems.empty()) throw ConfigError(problems);
  const auto dir = fs::path(ckpt).parent_path();
  if (!kv.contains("vocab")) kv["vocab"] = (dir / "vocab.txt").string();
  LoadedRun run{load_data("checkpoint " + ckpt, [&] { return FusionModel<float>::load_file(ckpt); }),
                load_data("vocab " + kv["vocab"], [&] { return SubwordVocab::load_file(kv["vocab"]); }),
                std::nullopt};
  const auto& mc = run.model.config();
  if (mc.vocab_size != run.vocab.size())
    throw DataError("DimensionMismatch: checkpoint vocab_size " + std::to_string(mc.vocab_size) + " vs vocab file " +
                    std::to_string(run.vocab.size()) + " pieces");
  if (mc.uses_pos()) {
    if (!kv.contains("tagger")) kv["tagger"] = (dir / "tagger.bin").string();
    run.tagger = load_data("tagger " + kv["tagger"], [&] { return PosTagger::load_file(kv["tagger"]); });
    if (run.tagger->hidden_size() != mc.b || run.tagger->tagset().size() != mc.e)
      throw DataError("DimensionMismatch: checkpoint W is b x e = " + std::to_string(mc.b) + "x" + std::to_string(mc.e) +
                      ", tagger softmax is " + std::to_string(run.tagger->hidden_size()) + "x" +
                      std::to_string(run.tagger->tagset().size()));
  }
  return run;
}

int cmd_evaluate(const CommonOptions& o, const KeyValues& aliases, std::ostream& out) {
  KeyValues kv = merge_config(o, aliases);
  std::vector<std::string> problems;
  reject_unknown(kv, {"checkpoint", "test", "vocab", "tagger", "report_file", "predictions_file", "from_predictions"},
                 problems);
  ConfusionCounts counts;
  if (kv.contains("from_predictions")) {
    if (!problems.empty()) throw ConfigError(problems);
    const auto path = kv["from_predictions"];
    const auto preds = load_data("predictions " + path, [&] {
      std::ifstream in(path);
      if (!in) throw std::runtime_error("cannot open");
      return parse_prediction_file(in);
    });
    counts = confusion_counts(preds.pred, preds.gold, preds.mask);
    ensure_dir(o.out_dir);
    write_manifest(o.out_dir, "evaluate", kv, {"from_predictions"});
  } else {
    const auto test_path = required(kv, "test", problems);
    auto run = load_run(kv, problems);
    if (!problems.empty()) throw ConfigError(problems);
    ensure_dir(o.out_dir);
    write_manifest(o.out_dir, "evaluate", kv, {"checkpoint", "test", "vocab", "tagger"});
    const auto corpus = load_data("test corpus " + test_path, [&] { return read_corpus_file(test_path); });
    const auto stream = make_stream(corpus.words(), corpus.labels(), run.vocab, run.tagger ? &*run.tagger : nullptr,
                                    run.model.config().nontail_pos);
    const auto result = load_data("evaluation", [&] { return evaluate_stream(run.model, stream); });
    counts = result.counts;
    if (kv.contains("predictions_file")) {
      Predictions p{stream.labels, result.predictions, stream.position_mask};
      std::ofstream pf(kv["predictions_file"]);
      if (!pf) throw DataError("cannot write " + kv["predictions_file"]);
      write_prediction_file(pf, p);
    }
  }
  const auto report = make_report(counts);
  out << render_report(report);
  if (kv.contains("report_file")) {
    std::ofstream rf(kv["report_file"]);
    if (!rf) throw DataError("cannot write " + kv["report_file"]);
    rf << render_report_kv(report);
  }
  return kOk;
}

int cmd_restore(const CommonOptions& o, const KeyValues& aliases, std::ostream& out) {
  KeyValues kv = merge_config(o, aliases);
  std::vector<std::string> problems;
  reject_unknown(kv, {"checkpoint", "input", "output", "vocab", "tagger"}, problems);
  const auto input = required(kv, "input", problems);
  auto run = load_run(kv, problems);
  if (!problems.empty()) throw ConfigError(problems);
  ensure_dir(o.out_dir);
  write_manifest(o.out_dir, "restore", kv, {"checkpoint", "input", "vocab", "tagger"});
  const auto words = load_data("input " + input, [&] {
    std::ifstream in(input);
    if (!in) throw std::runtime_error("cannot open");
    std::vector<std::string> w;
    std::string tok;
    while (in >> tok) w.push_back(tok);
    return w;
  });
  const auto text = load_data("restore", [&] {
    return restore_words(run.model, run.vocab, run.tagger ? &*run.tagger : nullptr, words);
  });
  if (kv.contains("output")) {
    std::ofstream of(kv["output"]);
    if (!of) throw DataError("cannot write " + kv["output"]);
    of << text << '\n';
  } else {
    out << text << '\n';
  }
  return kOk;
}

}  // namespace

TokenStream make_stream(const std::vector<std::string>& words, const std::vector<PunctLabel>& labels,
                        const SubwordVocab& vocab, const PosTagger* tagger, NontailPos nontail) {
  const int x_tag = tagger ? tagger->tagset().x_id() : PosTagset::universal().x_id();
  const std::vector<int> tags = tagger ? tagger->predict_tags(words) : std::vector<int>(words.size(), x_tag);
  return align(vocab, words, labels, tags, AlignOptions{nontail, x_tag, true});
}

std::string restore_words(const FusionModel<float>& model, const SubwordVocab& vocab, const PosTagger* tagger,
                          const std::vector<std::string>& words) {
  if (words.empty()) return {};
  const std::vector<PunctLabel> none(words.size(), PunctLabel::O);
  const auto stream = make_stream(words, none, vocab, tagger, model.config().nontail_pos);
  const auto eval = evaluate_stream(model, stream);
  std::string out;
  std::size_t w = 0;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    if (!stream.position_mask[i]) continue;
    if (w > 0) out += ' ';
    out += words[w++];
    switch (eval.predictions[i]) {
      case PunctLabel::COMMA: out += ','; break;
      case PunctLabel::PERIOD: out += '.'; break;
      case PunctLabel::QUESTION: out += '?'; break;
      case PunctLabel::O: break;
    }
  }
  return out;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path + " for digest");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"punc: punctuation restoration with POS fusion and sequence boundary sampling"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  CommonOptions common;
  KeyValues aliases;
  auto alias = [&](CLI::App* cmd, const std::string& flag, const std::string& key, const std::string& help) {
    cmd->add_option(flag, aliases[key], help);
  };

  auto* tv = app.add_subcommand("train-vocab", "train a byte-pair subword vocabulary");
  add_common(tv, common);
  alias(tv, "--corpus", "corpus", "word<TAB>LABEL corpus");
  alias(tv, "--vocab-size", "vocab_size", "total pieces including specials");
  alias(tv, "--out", "out", "vocabulary file to write");

  auto* tt = app.add_subcommand("train-tagger", "train the POS tagger whose softmax weights become W");
  add_common(tt, common);
  alias(tt, "--corpus", "tagged_corpus", "word<TAB>UPOS corpus, blank line between sentences");
  alias(tt, "--heldout", "heldout", "held-out tagged corpus for accuracy");
  alias(tt, "--out", "out", "tagger checkpoint to write");

  auto* tr = app.add_subcommand("train", "train the fusion model");
  add_common(tr, common);
  alias(tr, "--train", "train", "training corpus");
  alias(tr, "--valid", "valid", "validation corpus");
  alias(tr, "--vocab", "vocab", "vocabulary file");
  alias(tr, "--tagger", "tagger", "tagger checkpoint");

  auto* ev = app.add_subcommand("evaluate", "score a checkpoint on a labeled corpus");
  add_common(ev, common);
  alias(ev, "--checkpoint", "checkpoint", "model checkpoint (vocab.txt/tagger.bin read from its directory)");
  alias(ev, "--test", "test", "test corpus");
  alias(ev, "--vocab", "vocab", "vocabulary file (default: next to the checkpoint)");
  alias(ev, "--tagger", "tagger", "tagger checkpoint (default: next to the checkpoint)");
  alias(ev, "--report-file", "report_file", "write key=value report here");
  alias(ev, "--predictions-file", "predictions_file", "write gold/pred/mask lines here");
  alias(ev, "--from-predictions", "from_predictions", "score an existing gold/pred/mask file instead");

  auto* rs = app.add_subcommand("restore", "insert punctuation into raw text");
  add_common(rs, common);
  alias(rs, "--checkpoint", "checkpoint", "model checkpoint");
  alias(rs, "--input", "input", "whitespace-separated words");
  alias(rs, "--output", "output", "output file (default: stdout)");
  alias(rs, "--vocab", "vocab", "vocabulary file (default: next to the checkpoint)");
  alias(rs, "--tagger", "tagger", "tagger checkpoint (default: next to the checkpoint)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, x;
    const int code = app.exit(e, o, x);
    out << o.str();
    err << x.str();
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*tv) return cmd_train_vocab(common, aliases, out);
    if (*tt) return cmd_train_tagger(common, aliases, out);
    if (*tr) return cmd_train(common, aliases, out);
    if (*ev) return cmd_evaluate(common, aliases, out);
    if (*rs) return cmd_restore(common, aliases, out);
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return kConfigError;
  } catch (const NumericFailure& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumericError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }
  return kConfigError;
}

}  // namespace punc::cli
