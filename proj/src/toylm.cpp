#include "copo/toylm.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "copo/simd/kernels.hpp"

namespace copo {

void EnvSpec::validate() const {
  if (vocab_size < 2) throw ConfigError("env.vocab_size", "must be >= 2");
  if (horizon < 1) throw ConfigError("env.horizon", "must be >= 1");
  if (!std::isfinite(null_bias)) {
    throw ConfigError("env.null_bias", "must be finite");
  }
  if (prompts.empty()) throw ConfigError("env.prompts", "no prompts defined");
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const PromptSpec& p = prompts[i];
    if (p.id != i) {
      throw ConfigError("env.prompts", "prompt ids must be 0..P-1 in order");
    }
    if (p.truth == kNullToken || p.truth < 0 ||
        static_cast<std::size_t>(p.truth) >= vocab_size) {
      throw ConfigError("env.prompts", "prompt " + std::to_string(i) +
                                           " truth must be a non-null token");
    }
    if (!std::isfinite(p.difficulty_bias)) {
      throw ConfigError("env.prompts", "prompt " + std::to_string(i) +
                                           " difficulty_bias must be finite");
    }
  }
}

EnvSpec make_env(std::size_t vocab_size, std::size_t horizon, double null_bias,
                 std::size_t easy, double easy_bias, std::size_t hard,
                 double hard_bias) {
  EnvSpec env;
  env.vocab_size = vocab_size;
  env.horizon = horizon;
  env.null_bias = null_bias;
  const std::size_t answers = vocab_size > 1 ? vocab_size - 1 : 1;
  for (std::size_t i = 0; i < easy + hard; ++i) {
    PromptSpec p;
    p.id = i;
    p.truth = static_cast<Token>(1 + i % answers);
    p.difficulty_bias = i < easy ? easy_bias : hard_bias;
    env.prompts.push_back(p);
  }
  return env;
}

PolicyParams::PolicyParams(std::size_t num_prompts, std::size_t horizon,
                           std::size_t vocab_size)
    : num_prompts_(num_prompts),
      horizon_(horizon),
      vocab_(vocab_size),
      logits_(num_prompts * horizon * (vocab_size + 1) * vocab_size, 0.0) {}

PolicyParams PolicyParams::initial(const EnvSpec& env) {
  env.validate();
  PolicyParams policy(env.prompts.size(), env.horizon, env.vocab_size);
  for (const PromptSpec& p : env.prompts) {
    for (std::size_t t = 0; t < env.horizon; ++t) {
      for (std::size_t c = 0; c < policy.contexts(); ++c) {
        std::span<double> r = policy.row(p.id, t, c);
        r[kNullToken] = env.null_bias;
        if (t + 1 == env.horizon) r[p.truth] -= p.difficulty_bias;
      }
    }
  }
  return policy;
}

std::size_t PolicyParams::row_offset(std::size_t prompt, std::size_t position,
                                     std::size_t context) const {
  if (prompt >= num_prompts_ || position >= horizon_ || context > vocab_) {
    throw std::out_of_range("PolicyParams: row index out of range");
  }
  return ((prompt * horizon_ + position) * contexts() + context) * vocab_;
}

std::span<double> PolicyParams::row(std::size_t prompt, std::size_t position,
                                    std::size_t context) {
  return {logits_.data() + row_offset(prompt, position, context), vocab_};
}

std::span<const double> PolicyParams::row(std::size_t prompt,
                                          std::size_t position,
                                          std::size_t context) const {
  return {logits_.data() + row_offset(prompt, position, context), vocab_};
}

std::size_t PolicyParams::context_at(std::span<const Token> tokens,
                                     std::size_t position) const {
  if (position == 0) return bos_context();
  return static_cast<std::size_t>(tokens[position - 1]);
}

bool PolicyParams::same_shape(const PolicyParams& other) const {
  return num_prompts_ == other.num_prompts_ && horizon_ == other.horizon_ &&
         vocab_ == other.vocab_;
}

void log_softmax(std::span<const double> logits, std::span<double> out) {
  const double shift = simd::max_value(logits);
  double total = 0.0;
  for (double z : logits) total += std::exp(z - shift);
  const double log_norm = shift + std::log(total);
  for (std::size_t v = 0; v < logits.size(); ++v) out[v] = logits[v] - log_norm;
}

std::vector<double> logprob(const PolicyParams& policy, std::size_t prompt,
                            std::span<const Token> tokens) {
  if (tokens.size() > policy.horizon()) {
    throw std::invalid_argument("logprob: response longer than horizon");
  }
  std::vector<double> out(tokens.size());
  std::vector<double> row_lp(policy.vocab_size());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const Token tok = tokens[t];
    if (tok < 0 || static_cast<std::size_t>(tok) >= policy.vocab_size()) {
      throw std::out_of_range("logprob: token " + std::to_string(tok) +
                              " outside vocabulary");
    }
    if (t + 1 < tokens.size() && tok == kNullToken) {
      throw std::invalid_argument("logprob: null token before end of response");
    }
    log_softmax(policy.row(prompt, t, policy.context_at(tokens, t)), row_lp);
    out[t] = row_lp[static_cast<std::size_t>(tok)];
  }
  return out;
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t step,
                          std::uint64_t slot) {
  // splitmix64 finalizer folded over the three coordinates.
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ step) ^ slot);
}

namespace {

double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

Response sample_response(const PolicyParams& policy, std::size_t prompt,
                         Rng& rng) {
  Response r;
  std::vector<double> row_lp(policy.vocab_size());
  for (std::size_t t = 0; t < policy.horizon(); ++t) {
    log_softmax(policy.row(prompt, t, policy.context_at(r.tokens, t)), row_lp);
    const double u = uniform01(rng);
    double cumulative = 0.0;
    std::size_t pick = row_lp.size();
    std::size_t last_nonzero = 0;
    for (std::size_t v = 0; v < row_lp.size(); ++v) {
      const double p = std::exp(row_lp[v]);
      if (p > 0.0) last_nonzero = v;
      cumulative += p;
      if (u < cumulative) {
        pick = v;
        break;
      }
    }
    if (pick == row_lp.size()) pick = last_nonzero;  // rounding shortfall
    r.tokens.push_back(static_cast<Token>(pick));
    r.logprobs_old.push_back(row_lp[pick]);
    if (static_cast<Token>(pick) == kNullToken) break;
  }
  return r;
}

ResponseGroup sample_group(const PolicyParams& policy, std::size_t prompt,
                           std::size_t group_size, Rng& rng) {
  if (group_size < 2) throw std::invalid_argument("sample_group: G must be >= 2");
  ResponseGroup g;
  g.prompt = prompt;
  g.responses.reserve(group_size);
  for (std::size_t i = 0; i < group_size; ++i) {
    g.responses.push_back(sample_response(policy, prompt, rng));
  }
  return g;
}

double kl_divergence(std::span<const double> p_logits,
                     std::span<const double> q_logits) {
  std::vector<double> lp(p_logits.size());
  std::vector<double> lq(q_logits.size());
  log_softmax(p_logits, lp);
  log_softmax(q_logits, lq);
  double kl = 0.0;
  for (std::size_t v = 0; v < lp.size(); ++v) {
    kl += std::exp(lp[v]) * (lp[v] - lq[v]);
  }
  return kl > 0.0 ? kl : 0.0;
}

double truth_probability(const PolicyParams& policy, std::size_t prompt,
                         Token truth) {
  const std::size_t vocab = policy.vocab_size();
  std::vector<double> mass(policy.contexts(), 0.0);
  std::vector<double> next(policy.contexts(), 0.0);
  std::vector<double> row_lp(vocab);
  mass[policy.bos_context()] = 1.0;
  for (std::size_t t = 0; t + 1 < policy.horizon(); ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t c = 0; c < mass.size(); ++c) {
      if (mass[c] == 0.0) continue;
      log_softmax(policy.row(prompt, t, c), row_lp);
      for (std::size_t v = 0; v < vocab; ++v) {
        if (static_cast<Token>(v) == kNullToken) continue;
        next[v] += mass[c] * std::exp(row_lp[v]);
      }
    }
    mass.swap(next);
  }
  double p = 0.0;
  for (std::size_t c = 0; c < mass.size(); ++c) {
    if (mass[c] == 0.0) continue;
    log_softmax(policy.row(prompt, policy.horizon() - 1, c), row_lp);
    p += mass[c] * std::exp(row_lp[static_cast<std::size_t>(truth)]);
  }
  return p;
}

double hard_prompt_truth_probability(const PolicyParams& policy,
                                     const EnvSpec& env) {
  double total = 0.0;
  std::size_t count = 0;
  for (const PromptSpec& p : env.prompts) {
    if (!p.is_hard()) continue;
    total += truth_probability(policy, p.id, p.truth);
    ++count;
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

}  // namespace copo
