#pragma once

// Local (intra-group) and global (inter-group) advantages, consistency
// entropy, and the entropy-driven blend between the two.

#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "copo/types.hpp"

namespace copo {

// Standard deviations at or below this are treated as zero variance.
inline constexpr double kDefaultStdGuard = 1e-8;

struct GroupStats {
  double mean = 0.0;
  double std = 0.0;  // population convention (divide by N)
  std::size_t size = 0;
};

GroupStats group_stats(std::span<const double> values);

// (v - mean) / std, or all zeros when std <= guard.
std::vector<double> standardize(std::span<const double> values,
                                double guard = kDefaultStdGuard);

// Requires at least two rewards.
std::vector<double> local_advantages(std::span<const double> rewards,
                                     double guard = kDefaultStdGuard);

// Mean reward of one prompt's group.
double prompt_level_reward(std::span<const double> rewards);

// Standardizes prompt-level rewards across the batch. Requires B >= 2.
std::vector<double> global_advantages(std::span<const double> prompt_rewards,
                                      double guard = kDefaultStdGuard);

struct EntropyReport {
  double entropy_bits = 0.0;
  std::size_t distinct_count = 0;
  Answer mode_answer;  // most frequent; ties go to the smallest answer
  std::map<Answer, double> support;
};

// Shannon entropy (base 2) of the empirical answer distribution. Null
// answers form their own outcome.
EntropyReport consistency_entropy(std::span<const Answer> answers);

struct BlendParams {
  double gamma = 20.0;  // sigmoid sharpness
  double rho = 1.5;     // entropy threshold in bits

  void validate() const;
};

struct BlendWeights {
  double local = 1.0;
  double global = 0.0;
};

// w_local = sigmoid(gamma * (H - rho)), w_global = 1 - w_local.
BlendWeights blend_weights(double entropy_bits, const BlendParams& params);
BlendWeights blend_weights(const EntropyReport& report,
                           const BlendParams& params);

// All-zero reward groups get (0, 1); everything else passes through.
BlendWeights apply_zero_control(BlendWeights weights,
                                std::span<const double> rewards);

enum class Strategy { grpo, dapo, go_selective, go_only, go_blended, copo };

std::string_view strategy_name(Strategy s);
Strategy parse_strategy(std::string_view name);  // throws ConfigError

struct GroupOutcome {
  std::vector<double> rewards;
  std::vector<Answer> answers;
};

struct AdvantageAssignment {
  std::vector<double> local;  // one per response
  double global = 0.0;        // broadcast to every response of the prompt
  double prompt_reward = 0.0;
  double entropy_bits = 0.0;
  BlendWeights weights;
};

bool all_equal(std::span<const double> values, double target);

// Per prompt: local advantages, entropy and weights. Across the batch:
// prompt-level rewards and global advantages. The strategy decides how the
// weights are chosen; dapo uses grpo weights (filtering happens upstream).
std::vector<AdvantageAssignment> assemble(std::span<const GroupOutcome> batch,
                                          const BlendParams& params,
                                          Strategy strategy,
                                          double guard = kDefaultStdGuard);

}  // namespace copo
