#include "punc/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace punc {

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
  std::string msg = "configuration error";
  if (problems.size() > 1) msg += "s";
  msg += ":";
  for (const auto& p : problems) msg += "\n  " + p;
  return msg;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Reads typed values out of a KeyValues map, recording bad ones.
class Reader {
 public:
  Reader(const KeyValues& kv, std::vector<std::string>& problems) : kv_(kv), problems_(problems) {}

  bool has(const std::string& key) const { return kv_.contains(key); }

  std::string text(const std::string& key, const std::string& fallback = "") const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }

  template <typename Int>
  Int integer(const std::string& key, Int fallback) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    Int v{};
    const auto& s = it->second;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      problems_.push_back(key + ": expected a non-negative integer, got '" + s + "'");
      return fallback;
    }
    return v;
  }

  double real(const std::string& key, double fallback) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing text");
      return v;
    } catch (const std::exception&) {
      problems_.push_back(key + ": expected a number, got '" + it->second + "'");
      return fallback;
    }
  }

  template <typename Enum>
  Enum choice(const std::string& key, Enum fallback, const std::vector<std::pair<std::string, Enum>>& options) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::string names;
    for (const auto& [name, value] : options) {
      if (name == it->second) return value;
      names += (names.empty() ? "" : "|") + name;
    }
    problems_.push_back(key + ": expected " + names + ", got '" + it->second + "'");
    return fallback;
  }

 private:
  const KeyValues& kv_;
  std::vector<std::string>& problems_;
};

bool is_metadata_key(const std::string& key) {
  return key == "command" || key == "version" || key == "out_dir" || key.rfind("digest.", 0) == 0;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> problems;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos || eq == 0) {
      problems.push_back("line " + std::to_string(line_no) + ": expected key=value");
      continue;
    }
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  if (!problems.empty()) throw ConfigError(problems);
  return kv;
}

KeyValues read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file " + path});
  return parse_key_values(in);
}

void apply_override(KeyValues& kv, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError({"override '" + assignment + "' is not key=value"});
  kv[trim(assignment.substr(0, eq))] = trim(assignment.substr(eq + 1));
}

void write_key_values(std::ostream& out, const KeyValues& kv) {
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

const std::vector<std::string>& train_config_keys() {
  static const std::vector<std::string> keys = {
      "train", "valid", "vocab", "tagger", "pos_source", "sampler", "seq_len", "seed",
      "d", "b", "e", "num_encoder_layers", "encoder_heads", "encoder_ffn_dim", "fusion_layers",
      "fusion_heads", "fusion_ffn_dim", "dropout", "nontail_pos", "loss_mask", "learning_rate",
      "adam_beta1", "adam_beta2", "adam_eps", "grad_clip_norm", "batch_size", "max_epochs", "patience"};
  return keys;
}

RunConfig RunConfig::resolve(const KeyValues& kv) {
  std::vector<std::string> problems;
  const auto& known = train_config_keys();
  for (const auto& [key, value] : kv) {
    if (is_metadata_key(key)) continue;
    if (std::find(known.begin(), known.end(), key) == known.end()) problems.push_back("unknown key '" + key + "'");
  }

  Reader r(kv, problems);
  RunConfig c;
  c.train_path = r.text("train");
  c.valid_path = r.text("valid");
  c.vocab_path = r.text("vocab");
  c.tagger_path = r.text("tagger");

  ModelConfig& m = c.model;
  m.pos_source = r.choice<PosSource>("pos_source", PosSource::Tagger,
                                     {{"none", PosSource::None}, {"random", PosSource::Random}, {"tagger", PosSource::Tagger}});
  m.loss_mask = r.choice<LossMask>("loss_mask", LossMask::None,
                                   {{"none", LossMask::None}, {"position_mask", LossMask::PositionMask}});
  m.nontail_pos = r.choice<NontailPos>("nontail_pos", NontailPos::Copy, {{"copy", NontailPos::Copy}, {"x", NontailPos::X}});
  m.seq_len = r.integer<std::size_t>("seq_len", 256);
  m.d = r.integer<std::size_t>("d", m.d);
  m.b = r.integer<std::size_t>("b", m.b);
  m.e = r.integer<std::size_t>("e", m.e);
  c.b_explicit = r.has("b");
  c.e_explicit = r.has("e");
  m.num_encoder_layers = r.integer<std::size_t>("num_encoder_layers", m.num_encoder_layers);
  m.encoder_heads = r.integer<std::size_t>("encoder_heads", m.encoder_heads);
  m.encoder_ffn_dim = r.integer<std::size_t>("encoder_ffn_dim", m.encoder_ffn_dim);
  m.fusion_layers = r.integer<std::size_t>("fusion_layers", m.fusion_layers);
  m.fusion_heads = r.integer<std::size_t>("fusion_heads", m.fusion_heads);
  m.fusion_ffn_dim = r.integer<std::size_t>("fusion_ffn_dim", m.fusion_ffn_dim);
  m.dropout = r.real("dropout", m.dropout);

  TrainConfig& t = c.train;
  t.seed = r.integer<std::uint64_t>("seed", 0);
  m.init_seed = t.seed;
  t.sampler = r.choice<SamplerKind>("sampler", SamplerKind::Sbs, {{"sbs", SamplerKind::Sbs}, {"fixed_split", SamplerKind::FixedSplit}});
  t.adam.learning_rate = r.real("learning_rate", t.adam.learning_rate);
  t.adam.beta1 = r.real("adam_beta1", t.adam.beta1);
  t.adam.beta2 = r.real("adam_beta2", t.adam.beta2);
  t.adam.eps = r.real("adam_eps", t.adam.eps);
  t.grad_clip_norm = r.real("grad_clip_norm", t.grad_clip_norm);
  t.batch_size = r.integer<std::size_t>("batch_size", t.batch_size);
  t.max_epochs = r.integer<std::size_t>("max_epochs", t.max_epochs);
  t.patience = r.integer<std::size_t>("patience", t.patience);

  if (c.train_path.empty()) problems.push_back("train: path to the training corpus is required");
  if (c.valid_path.empty()) problems.push_back("valid: path to the validation corpus is required");
  if (c.vocab_path.empty()) problems.push_back("vocab: path to the vocabulary file is required");
  if (m.pos_source != PosSource::None && c.tagger_path.empty())
    problems.push_back("tagger: a tagger checkpoint is required when pos_source=" +
                       std::string(to_string(m.pos_source)) + " (it supplies the predicted tags)");

  ModelConfig probe = m;
  probe.vocab_size = std::max<std::size_t>(probe.vocab_size, 3);
  for (auto& p : probe.validate()) problems.push_back(p);
  for (auto& p : t.validate()) problems.push_back(p);
  if (!problems.empty()) throw ConfigError(problems);
  return c;
}

KeyValues RunConfig::to_key_values() const {
  KeyValues kv = model.to_map();
  kv.erase("init_seed");
  kv.erase("vocab_size");
  kv["train"] = train_path;
  kv["valid"] = valid_path;
  kv["vocab"] = vocab_path;
  if (!tagger_path.empty()) kv["tagger"] = tagger_path;
  std::ostringstream num;
  num.precision(17);
  auto real = [&](double v) {
    num.str("");
    num << v;
    return num.str();
  };
  kv["seed"] = std::to_string(train.seed);
  kv["sampler"] = train.sampler == SamplerKind::Sbs ? "sbs" : "fixed_split";
  kv["learning_rate"] = real(train.adam.learning_rate);
  kv["adam_beta1"] = real(train.adam.beta1);
  kv["adam_beta2"] = real(train.adam.beta2);
  kv["adam_eps"] = real(train.adam.eps);
  kv["grad_clip_norm"] = real(train.grad_clip_norm);
  kv["batch_size"] = std::to_string(train.batch_size);
  kv["max_epochs"] = std::to_string(train.max_epochs);
  kv["patience"] = std::to_string(train.patience);
  return kv;
}

}  // namespace punc
