#include "copo/reward.hpp"

#include <stdexcept>

namespace copo {

Answer extract_answer(std::span<const Token> response, std::size_t horizon) {
  if (response.size() > horizon) {
    throw std::invalid_argument("extract_answer: response longer than horizon");
  }
  if (response.size() < horizon || response.empty()) return std::nullopt;
  const Token last = response.back();
  if (last == kNullToken) return std::nullopt;
  return last;
}

double score(const Answer& pred, Token truth, RewardSpec spec) {
  switch (spec.mode) {
    case RewardMode::binary:
      return pred.has_value() && *pred == truth ? 1.0 : 0.0;
    case RewardMode::format_aware:
      if (!pred.has_value()) return 0.0;
      return *pred == truth ? 1.0 : kFormatOnlyReward;
  }
  return 0.0;
}

std::vector<Answer> group_answers(const ResponseGroup& group,
                                  std::size_t horizon) {
  std::vector<Answer> answers;
  answers.reserve(group.size());
  for (const Response& r : group.responses) {
    answers.push_back(extract_answer(r.tokens, horizon));
  }
  return answers;
}

std::vector<double> group_rewards(std::span<const Answer> answers, Token truth,
                                  RewardSpec spec) {
  if (answers.empty()) throw std::invalid_argument("group_rewards: empty group");
  std::vector<double> rewards;
  rewards.reserve(answers.size());
  for (const Answer& a : answers) rewards.push_back(score(a, truth, spec));
  return rewards;
}

std::vector<double> group_rewards(const ResponseGroup& group, Token truth,
                                  std::size_t horizon, RewardSpec spec) {
  const std::vector<Answer> answers = group_answers(group, horizon);
  return group_rewards(answers, truth, spec);
}

}  // namespace copo
