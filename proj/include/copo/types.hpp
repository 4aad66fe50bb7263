#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace copo {

using Token = std::int32_t;

// Reserved vocabulary entry for malformed output. Sampling it ends the
// response and yields a null answer.
inline constexpr Token kNullToken = 0;

// Extracted final answer; std::nullopt when no answer slot was produced.
// Ordering (std::optional) places null before every real token.
using Answer = std::optional<Token>;

struct Response {
  std::vector<Token> tokens;
  // log pi_old(o_t | q, o_<t), one entry per token.
  std::vector<double> logprobs_old;
};

struct ResponseGroup {
  std::size_t prompt = 0;
  std::vector<Response> responses;

  std::size_t size() const { return responses.size(); }
};

// Invalid experiment or training configuration. `field` names the offending
// key so the CLI can report it.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// A gradient or objective became non-finite during training.
class NumericError : public std::runtime_error {
 public:
  NumericError(std::size_t step, const std::string& message)
      : std::runtime_error("step " + std::to_string(step) + ": " + message),
        step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

}  // namespace copo
