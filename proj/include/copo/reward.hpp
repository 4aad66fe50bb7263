#pragma once

// Answer extraction and rule-based rewards for toy-LM responses.

#include <span>
#include <vector>

#include "copo/types.hpp"

namespace copo {

enum class RewardMode { binary, format_aware };

struct RewardSpec {
  RewardMode mode = RewardMode::binary;
};

inline constexpr double kFormatOnlyReward = 0.1;

// The final token of a full-length response is its answer. Responses that
// terminate early, or end on the reserved null token, carry no answer.
Answer extract_answer(std::span<const Token> response, std::size_t horizon);

// binary:       1 if pred == truth else 0
// format-aware: 0 for a null answer, 1 if correct, 0.1 otherwise
double score(const Answer& pred, Token truth, RewardSpec spec);

std::vector<Answer> group_answers(const ResponseGroup& group,
                                  std::size_t horizon);

std::vector<double> group_rewards(std::span<const Answer> answers, Token truth,
                                  RewardSpec spec);

std::vector<double> group_rewards(const ResponseGroup& group, Token truth,
                                  std::size_t horizon, RewardSpec spec);

}  // namespace copo
