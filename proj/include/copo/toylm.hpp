#pragma once

// Tabular order-1 autoregressive toy language model.
//
// Each prompt owns a logit table indexed by (position, context), where the
// context is the previous token, or a begin-of-sequence slot at position 0.
// Token 0 is the reserved null token; sampling it ends the response.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "copo/types.hpp"

namespace copo {

struct PromptSpec {
  std::size_t id = 0;
  Token truth = 1;
  // Logit penalty on the truth token at the answer position. Negative
  // values make a prompt easy, positive values make it hard.
  double difficulty_bias = 0.0;

  bool is_hard() const { return difficulty_bias > 0.0; }
};

struct EnvSpec {
  std::size_t vocab_size = 6;  // includes the null token
  std::size_t horizon = 3;
  // Initial logit of the null token in every row.
  double null_bias = -6.0;
  std::vector<PromptSpec> prompts;

  void validate() const;  // throws ConfigError
};

// `easy` prompts with truth boosted by `easy_bias` followed by `hard`
// prompts penalized by `hard_bias`. Truth tokens cycle over 1..V-1.
EnvSpec make_env(std::size_t vocab_size, std::size_t horizon, double null_bias,
                 std::size_t easy, double easy_bias, std::size_t hard,
                 double hard_bias);

class PolicyParams {
 public:
  PolicyParams() = default;
  PolicyParams(std::size_t num_prompts, std::size_t horizon,
               std::size_t vocab_size);

  // Null-token bias everywhere plus each prompt's difficulty bias on its
  // truth token at the final position.
  static PolicyParams initial(const EnvSpec& env);

  std::size_t num_prompts() const { return num_prompts_; }
  std::size_t horizon() const { return horizon_; }
  std::size_t vocab_size() const { return vocab_; }
  std::size_t contexts() const { return vocab_ + 1; }
  std::size_t bos_context() const { return vocab_; }

  std::size_t row_offset(std::size_t prompt, std::size_t position,
                         std::size_t context) const;
  std::span<double> row(std::size_t prompt, std::size_t position,
                        std::size_t context);
  std::span<const double> row(std::size_t prompt, std::size_t position,
                              std::size_t context) const;

  // Context used to predict tokens[position].
  std::size_t context_at(std::span<const Token> tokens,
                         std::size_t position) const;

  std::span<double> flat() { return logits_; }
  std::span<const double> flat() const { return logits_; }

  bool same_shape(const PolicyParams& other) const;
  bool operator==(const PolicyParams& other) const = default;

 private:
  std::size_t num_prompts_ = 0;
  std::size_t horizon_ = 0;
  std::size_t vocab_ = 0;
  std::vector<double> logits_;
};

// Numerically stable log-softmax of one logit row.
void log_softmax(std::span<const double> logits, std::span<double> out);

// log pi(o_t | q, o_<t) for every token of `tokens`. Throws
// std::out_of_range on a token outside the vocabulary.
std::vector<double> logprob(const PolicyParams& policy, std::size_t prompt,
                            std::span<const Token> tokens);

// Independent stream per (seed, step, slot) so that sampling does not depend
// on how prompts are distributed over workers.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t step,
                          std::uint64_t slot);

using Rng = std::mt19937_64;

Response sample_response(const PolicyParams& policy, std::size_t prompt,
                         Rng& rng);

ResponseGroup sample_group(const PolicyParams& policy, std::size_t prompt,
                           std::size_t group_size, Rng& rng);

// Forward KL(p || q) in nats between the softmaxes of two logit rows.
double kl_divergence(std::span<const double> p_logits,
                     std::span<const double> q_logits);

// Probability that a fresh sample from `prompt` carries the truth answer,
// computed exactly by propagating context mass through the table.
double truth_probability(const PolicyParams& policy, std::size_t prompt,
                         Token truth);

// Mean truth probability over hard prompts (0 when there are none).
double hard_prompt_truth_probability(const PolicyParams& policy,
                                     const EnvSpec& env);

}  // namespace copo
