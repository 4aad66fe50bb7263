#pragma once

// Blended clipped surrogate objective with an exact KL penalty, and its
// analytic gradient with respect to every logit.

#include <span>
#include <string_view>
#include <vector>

#include "copo/advantage.hpp"
#include "copo/toylm.hpp"

namespace copo {

enum class Aggregation {
  sample_mean,  // (1/G) sum_i (1/|o_i|) sum_t
  token_level,  // (1 / sum_i |o_i|) sum_i sum_t
};

std::string_view aggregation_name(Aggregation a);
Aggregation parse_aggregation(std::string_view name);  // throws ConfigError

struct ClipRange {
  double low = 0.2;
  double high = 0.2;
};

// One prompt's rollout: responses with their old-policy log-probabilities,
// rewards, answers and the advantages frozen at rollout time.
struct ScoredGroup {
  ResponseGroup group;
  std::vector<Answer> answers;
  std::vector<double> rewards;
  AdvantageAssignment advantage;
};

struct SurrogateResult {
  double objective = 0.0;   // policy_term - beta * kl, averaged over prompts
  double policy_term = 0.0;
  double kl = 0.0;
  PolicyParams gradient;    // d objective / d logits
};

// Per-token weight applied by the clipped surrogate: w * A when the
// unclipped branch of min(r A, clip(r) A) is active, else 0.
double clipped_branch_weight(double ratio, double advantage, ClipRange clip);

double clipped_term(double ratio, double advantage, ClipRange clip);

// Exact forward KL(policy || ref), summed over the states visited by the
// responses and aggregated like the surrogate.
double exact_kl(const PolicyParams& policy, const PolicyParams& ref,
                std::span<const ScoredGroup> groups, Aggregation aggregation);

// The old policy enters through the recorded `logprobs_old` of each
// response. Throws std::invalid_argument on shape mismatches.
SurrogateResult surrogate(const PolicyParams& policy, const PolicyParams& ref,
                          std::span<const ScoredGroup> groups, ClipRange clip,
                          double beta, Aggregation aggregation);

}  // namespace copo
