#include "copo/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "copo/simd/kernels.hpp"

namespace copo {

std::string_view aggregation_name(Aggregation a) {
  switch (a) {
    case Aggregation::sample_mean:
      return "sample_mean";
    case Aggregation::token_level:
      return "token_level";
  }
  return "unknown";
}

Aggregation parse_aggregation(std::string_view name) {
  if (name == "sample_mean") return Aggregation::sample_mean;
  if (name == "token_level") return Aggregation::token_level;
  throw ConfigError("aggregation", "unknown aggregation '" + std::string(name) +
                                       "' (expected sample_mean or token_level)");
}

double clipped_term(double ratio, double advantage, ClipRange clip) {
  const double clipped = std::clamp(ratio, 1.0 - clip.low, 1.0 + clip.high);
  return std::min(ratio * advantage, clipped * advantage);
}

double clipped_branch_weight(double ratio, double advantage, ClipRange clip) {
  const double clipped = std::clamp(ratio, 1.0 - clip.low, 1.0 + clip.high);
  return ratio * advantage <= clipped * advantage ? advantage : 0.0;
}

namespace {

void validate_group(const PolicyParams& policy, const ScoredGroup& sg) {
  const ResponseGroup& g = sg.group;
  if (g.prompt >= policy.num_prompts()) {
    throw std::invalid_argument("surrogate: group prompt outside policy table");
  }
  if (sg.advantage.local.size() != g.size()) {
    throw std::invalid_argument(
        "surrogate: advantage assignment does not match group size");
  }
  for (const Response& r : g.responses) {
    if (r.tokens.empty() || r.tokens.size() > policy.horizon()) {
      throw std::invalid_argument("surrogate: response length out of range");
    }
    if (r.logprobs_old.size() != r.tokens.size()) {
      throw std::invalid_argument(
          "surrogate: logprobs_old length differs from token count");
    }
  }
}

// Per-token normalization for response i of a group.
double token_scale(const ResponseGroup& g, std::size_t i,
                   Aggregation aggregation) {
  if (aggregation == Aggregation::sample_mean) {
    return 1.0 / (static_cast<double>(g.size()) *
                  static_cast<double>(g.responses[i].tokens.size()));
  }
  std::size_t total = 0;
  for (const Response& r : g.responses) total += r.tokens.size();
  return 1.0 / static_cast<double>(total);
}

}  // namespace

double exact_kl(const PolicyParams& policy, const PolicyParams& ref,
                std::span<const ScoredGroup> groups, Aggregation aggregation) {
  if (!policy.same_shape(ref)) {
    throw std::invalid_argument("exact_kl: policy and reference shapes differ");
  }
  if (groups.empty()) return 0.0;
  double total = 0.0;
  for (const ScoredGroup& sg : groups) {
    validate_group(policy, sg);
    const ResponseGroup& g = sg.group;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double scale = token_scale(g, i, aggregation);
      const auto& tokens = g.responses[i].tokens;
      for (std::size_t t = 0; t < tokens.size(); ++t) {
        const std::size_t ctx = policy.context_at(tokens, t);
        total += scale * kl_divergence(policy.row(g.prompt, t, ctx),
                                       ref.row(g.prompt, t, ctx));
      }
    }
  }
  return total / static_cast<double>(groups.size());
}

SurrogateResult surrogate(const PolicyParams& policy, const PolicyParams& ref,
                          std::span<const ScoredGroup> groups, ClipRange clip,
                          double beta, Aggregation aggregation) {
  if (!policy.same_shape(ref)) {
    throw std::invalid_argument("surrogate: policy and reference shapes differ");
  }
  SurrogateResult result;
  result.gradient =
      PolicyParams(policy.num_prompts(), policy.horizon(), policy.vocab_size());
  if (groups.empty()) return result;

  const std::size_t vocab = policy.vocab_size();
  const double prompt_scale = 1.0 / static_cast<double>(groups.size());
  std::vector<double> lp(vocab);
  std::vector<double> lq(vocab);
  std::vector<double> probs(vocab);
  std::vector<double> kl_grad(vocab);

  double policy_term = 0.0;
  double kl_term = 0.0;
  for (const ScoredGroup& sg : groups) {
    validate_group(policy, sg);
    const ResponseGroup& g = sg.group;
    const AdvantageAssignment& adv = sg.advantage;
    const double w_local = adv.weights.local;
    const double w_global = adv.weights.global;

    for (std::size_t i = 0; i < g.size(); ++i) {
      const Response& resp = g.responses[i];
      const double scale = prompt_scale * token_scale(g, i, aggregation);
      const double a_local = adv.local[i];
      for (std::size_t t = 0; t < resp.tokens.size(); ++t) {
        const auto tok = static_cast<std::size_t>(resp.tokens[t]);
        if (tok >= vocab) throw std::out_of_range("surrogate: token out of range");
        const std::size_t ctx = policy.context_at(resp.tokens, t);
        std::span<double> grad_row = result.gradient.row(g.prompt, t, ctx);

        log_softmax(policy.row(g.prompt, t, ctx), lp);
        for (std::size_t v = 0; v < vocab; ++v) probs[v] = std::exp(lp[v]);

        const double ratio = std::exp(lp[tok] - resp.logprobs_old[t]);
        policy_term += scale * (w_local * clipped_term(ratio, a_local, clip) +
                                w_global * clipped_term(ratio, adv.global, clip));

        // d/dz of ratio = ratio * (onehot(tok) - probs).
        const double coef =
            scale * ratio *
            (w_local * clipped_branch_weight(ratio, a_local, clip) +
             w_global * clipped_branch_weight(ratio, adv.global, clip));
        if (coef != 0.0) {
          simd::axpy(-coef, probs, grad_row);
          grad_row[tok] += coef;
        }

        log_softmax(ref.row(g.prompt, t, ctx), lq);
        double kl = 0.0;
        for (std::size_t v = 0; v < vocab; ++v) kl += probs[v] * (lp[v] - lq[v]);
        kl_term += scale * kl;
        if (beta != 0.0) {
          for (std::size_t v = 0; v < vocab; ++v) {
            kl_grad[v] = probs[v] * ((lp[v] - lq[v]) - kl);
          }
          simd::axpy(-beta * scale, kl_grad, grad_row);
        }
      }
    }
  }
  result.policy_term = policy_term;
  result.kl = kl_term;
  result.objective = policy_term - beta * kl_term;
  return result;
}

}  // namespace copo
