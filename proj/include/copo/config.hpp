#pragma once

// Experiment configuration: a flat `key = value` text format with dotted
// section keys (`env.*`, `train.*`). Precedence is defaults < file <
// command-line overrides.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "copo/toylm.hpp"
#include "copo/trainer.hpp"

namespace copo {

struct ExperimentConfig {
  EnvSpec env;
  TrainConfig train;
  std::filesystem::path output_dir;
  std::size_t eval_k = 8;
  bool jsonl = false;
};

class ConfigBuilder {
 public:
  ConfigBuilder();  // seeded with defaults

  // Parses `key = value` lines; `#` starts a comment. Throws ConfigError.
  void load_text(std::string_view text, std::string_view origin = "<text>");
  // Throws std::runtime_error (naming the path) when the file is unreadable.
  void load_file(const std::filesystem::path& path);
  // `key=value`; a key without a section resolves to train.* or env.*.
  void apply_override(std::string_view assignment);
  void set(std::string_view key, std::string value);

  bool is_set(std::string_view key) const;
  const std::map<std::string, std::string>& values() const { return values_; }

  // Validates every field; throws ConfigError naming the key.
  ExperimentConfig build() const;

  // Resolved snapshot in the same text format; loading it alone reproduces
  // the run.
  std::string snapshot() const;

  static std::string resolve_key(std::string_view key);

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> explicit_;
};

// Environment from the resolved `env.*` keys.
EnvSpec build_env(const std::map<std::string, std::string>& values);

std::string format_exact(double value);  // round-trips through stod

}  // namespace copo
