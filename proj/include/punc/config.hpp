#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "punc/model.hpp"
#include "punc/pos_tagger.hpp"
#include "punc/trainer.hpp"

namespace punc {

using KeyValues = std::map<std::string, std::string>;

/// Carries every problem found, not just the first.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Flat `key=value` text; '#' starts a comment line, blank lines ignored.
KeyValues parse_key_values(std::istream& in);
KeyValues read_config_file(const std::string& path);
/// Applies one `key=value` override.
void apply_override(KeyValues& kv, const std::string& assignment);
void write_key_values(std::ostream& out, const KeyValues& kv);

/// Fully resolved settings for the `train` command.
struct RunConfig {
  std::string train_path;
  std::string valid_path;
  std::string vocab_path;
  std::string tagger_path;  // empty when pos_source=none
  ModelConfig model;
  TrainConfig train;
  bool b_explicit = false;
  bool e_explicit = false;

  /// Parses and validates; throws ConfigError listing every problem.
  static RunConfig resolve(const KeyValues& kv);
  KeyValues to_key_values() const;
};

/// Keys accepted by `train`.
const std::vector<std::string>& train_config_keys();

}  // namespace punc
