#include "copo/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace copo {

namespace {

const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> d = {
      {"env.vocab_size", "6"},
      {"env.horizon", "3"},
      {"env.null_bias", "-6"},
      {"env.easy_prompts", "8"},
      {"env.easy_bias", "-5"},
      {"env.hard_prompts", "8"},
      {"env.hard_bias", "12"},
      // Explicit `truth:bias` list separated by spaces; overrides the
      // easy/hard generator when nonempty.
      {"env.prompts", ""},
      {"train.strategy", "copo"},
      {"train.group_size", "6"},
      {"train.batch_size", "16"},
      {"train.mini_batches", "4"},
      {"train.lr", "0.05"},
      {"train.eps_low", "0.2"},
      {"train.eps_high", "0.2"},
      {"train.beta", "0.04"},
      {"train.gamma", "20"},
      {"train.rho", "1.5"},
      {"train.aggregation", "sample_mean"},
      {"train.reward_mode", "binary"},
      {"train.steps", "300"},
      {"train.seed", "0"},
      {"train.weight_decay", "0"},
      {"train.std_guard", "1e-08"},
      {"output_dir", ""},
      {"eval_k", "8"},
      {"jsonl", "false"},
  };
  return d;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

const std::string& lookup(const std::map<std::string, std::string>& values,
                          const std::string& key) {
  auto it = values.find(key);
  if (it == values.end()) throw ConfigError(key, "missing value");
  return it->second;
}

double as_double(const std::map<std::string, std::string>& values,
                 const std::string& key) {
  const std::string& text = lookup(values, key);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a number, got '" + text + "'");
  }
  if (used != text.size()) {
    throw ConfigError(key, "expected a number, got '" + text + "'");
  }
  return v;
}

std::uint64_t as_uint(const std::map<std::string, std::string>& values,
                      const std::string& key) {
  const std::string& text = lookup(values, key);
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError(key, "expected a non-negative integer, got '" + text + "'");
  }
  try {
    return std::stoull(text);
  } catch (const std::exception&) {
    throw ConfigError(key, "integer out of range: '" + text + "'");
  }
}

bool as_bool(const std::map<std::string, std::string>& values,
             const std::string& key) {
  const std::string& text = lookup(values, key);
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + text + "'");
}

}  // namespace

std::string format_exact(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

ConfigBuilder::ConfigBuilder() : values_(defaults()) {}

std::string ConfigBuilder::resolve_key(std::string_view key) {
  const auto& d = defaults();
  std::string k(key);
  if (d.count(k)) return k;
  if (k.find('.') == std::string::npos) {
    for (const char* section : {"train.", "env."}) {
      std::string candidate = section + k;
      if (d.count(candidate)) return candidate;
    }
  }
  throw ConfigError(k, "unknown configuration key");
}

void ConfigBuilder::set(std::string_view key, std::string value) {
  const std::string resolved = resolve_key(key);
  values_[resolved] = std::move(value);
  explicit_[resolved] = true;
}

bool ConfigBuilder::is_set(std::string_view key) const {
  return explicit_.count(resolve_key(key)) > 0;
}

void ConfigBuilder::load_text(std::string_view text, std::string_view origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(line_no),
                        "expected 'key = value'");
    }
    set(trim(std::string_view(content).substr(0, eq)),
        trim(std::string_view(content).substr(eq + 1)));
  }
}

void ConfigBuilder::load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  load_text(buf.str(), path.string());
}

void ConfigBuilder::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError(std::string(assignment), "override must be key=value");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

EnvSpec build_env(const std::map<std::string, std::string>& values) {
  EnvSpec env;
  env.vocab_size = as_uint(values, "env.vocab_size");
  env.horizon = as_uint(values, "env.horizon");
  env.null_bias = as_double(values, "env.null_bias");
  const std::string& explicit_list = lookup(values, "env.prompts");
  if (explicit_list.empty()) {
    env = make_env(env.vocab_size, env.horizon, env.null_bias,
                   as_uint(values, "env.easy_prompts"),
                   as_double(values, "env.easy_bias"),
                   as_uint(values, "env.hard_prompts"),
                   as_double(values, "env.hard_bias"));
  } else {
    std::istringstream in(explicit_list);
    std::string item;
    while (in >> item) {
      const auto colon = item.find(':');
      PromptSpec p;
      p.id = env.prompts.size();
      try {
        if (colon == std::string::npos) throw std::invalid_argument(item);
        std::size_t used = 0;
        const std::string truth = item.substr(0, colon);
        const std::string bias = item.substr(colon + 1);
        p.truth = static_cast<Token>(std::stoi(truth, &used));
        if (used != truth.size()) throw std::invalid_argument(item);
        p.difficulty_bias = std::stod(bias, &used);
        if (used != bias.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw ConfigError("env.prompts",
                          "expected 'truth:bias' entries, got '" + item + "'");
      }
      env.prompts.push_back(p);
    }
  }
  env.validate();
  return env;
}

ExperimentConfig ConfigBuilder::build() const {
  ExperimentConfig cfg;
  cfg.env = build_env(values_);

  TrainConfig& t = cfg.train;
  t.strategy = [&] {
    try {
      return parse_strategy(lookup(values_, "train.strategy"));
    } catch (const ConfigError& e) {
      throw ConfigError("train.strategy", e.what());
    }
  }();
  t.aggregation = [&] {
    try {
      return parse_aggregation(lookup(values_, "train.aggregation"));
    } catch (const ConfigError& e) {
      throw ConfigError("train.aggregation", e.what());
    }
  }();
  const std::string& mode = lookup(values_, "train.reward_mode");
  if (mode == "binary") {
    t.reward.mode = RewardMode::binary;
  } else if (mode == "format_aware") {
    t.reward.mode = RewardMode::format_aware;
  } else {
    throw ConfigError("train.reward_mode",
                      "expected binary or format_aware, got '" + mode + "'");
  }
  t.group_size = as_uint(values_, "train.group_size");
  t.batch_size = as_uint(values_, "train.batch_size");
  t.mini_batches = as_uint(values_, "train.mini_batches");
  t.lr = as_double(values_, "train.lr");
  t.clip.low = as_double(values_, "train.eps_low");
  t.clip.high = as_double(values_, "train.eps_high");
  t.beta = as_double(values_, "train.beta");
  t.blend.gamma = as_double(values_, "train.gamma");
  t.blend.rho = as_double(values_, "train.rho");
  t.steps = as_uint(values_, "train.steps");
  t.seed = as_uint(values_, "train.seed");
  t.weight_decay = as_double(values_, "train.weight_decay");
  t.std_guard = as_double(values_, "train.std_guard");
  t.validate();

  cfg.output_dir = lookup(values_, "output_dir");
  cfg.eval_k = as_uint(values_, "eval_k");
  if (cfg.eval_k < 1) throw ConfigError("eval_k", "must be >= 1");
  cfg.jsonl = as_bool(values_, "jsonl");
  return cfg;
}

std::string ConfigBuilder::snapshot() const {
  std::ostringstream out;
  out << "# resolved configuration\n";
  for (const auto& [key, value] : values_) out << key << " = " << value << '\n';
  return out.str();
}

}  // namespace copo
