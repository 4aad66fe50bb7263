#include "copo/advantage.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "copo/simd/kernels.hpp"

namespace copo {

GroupStats group_stats(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("group_stats: empty input");
  const auto n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
#ifdef COPO_LAB_FAULT_SAMPLE_STD
  const double denom = values.size() > 1 ? n - 1.0 : n;
#else
  const double denom = n;
#endif
  return {mean, std::sqrt(sq / denom), values.size()};
}

std::vector<double> standardize(std::span<const double> values, double guard) {
  if (guard < 0.0) throw std::invalid_argument("standardize: negative guard");
  const GroupStats stats = group_stats(values);
  std::vector<double> out(values.size(), 0.0);
  if (stats.std <= guard) return out;
  simd::standardize(values, out, stats.mean, stats.std);
  return out;
}

std::vector<double> local_advantages(std::span<const double> rewards,
                                     double guard) {
  if (rewards.size() < 2) {
    throw std::invalid_argument("local_advantages: group size must be >= 2");
  }
  return standardize(rewards, guard);
}

double prompt_level_reward(std::span<const double> rewards) {
  return group_stats(rewards).mean;
}

std::vector<double> global_advantages(std::span<const double> prompt_rewards,
                                      double guard) {
  if (prompt_rewards.size() < 2) {
    throw std::invalid_argument("global_advantages: batch size must be >= 2");
  }
  return standardize(prompt_rewards, guard);
}

EntropyReport consistency_entropy(std::span<const Answer> answers) {
  if (answers.empty()) {
    throw std::invalid_argument("consistency_entropy: empty answer list");
  }
  std::map<Answer, std::size_t> counts;
  for (const Answer& a : answers) ++counts[a];

  EntropyReport report;
  report.distinct_count = counts.size();
  const auto n = static_cast<double>(answers.size());
  std::size_t best = 0;
  double h = 0.0;
  for (const auto& [answer, count] : counts) {
    const double p = static_cast<double>(count) / n;
    report.support.emplace(answer, p);
#ifdef COPO_LAB_FAULT_NATURAL_LOG
    h -= p * std::log(p);
#else
    h -= p * std::log2(p);
#endif
    // Map iteration is ascending, so strict > keeps the smallest on ties.
    if (count > best) {
      best = count;
      report.mode_answer = answer;
    }
  }
  report.entropy_bits = h > 0.0 ? h : 0.0;
  return report;
}

void BlendParams::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw ConfigError("gamma", "must be finite and > 0");
  }
  if (!(rho >= 0.0) || !std::isfinite(rho)) {
    throw ConfigError("rho", "must be finite and >= 0");
  }
}

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

BlendWeights blend_weights(double entropy_bits, const BlendParams& params) {
  params.validate();
  const double local = sigmoid(params.gamma * (entropy_bits - params.rho));
  return {local, 1.0 - local};
}

BlendWeights blend_weights(const EntropyReport& report,
                           const BlendParams& params) {
  return blend_weights(report.entropy_bits, params);
}

bool all_equal(std::span<const double> values, double target) {
  return std::all_of(values.begin(), values.end(),
                     [target](double v) { return v == target; });
}

BlendWeights apply_zero_control(BlendWeights weights,
                                std::span<const double> rewards) {
  if (!rewards.empty() && all_equal(rewards, 0.0)) return {0.0, 1.0};
  return weights;
}

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::grpo:
      return "grpo";
    case Strategy::dapo:
      return "dapo";
    case Strategy::go_selective:
      return "go_selective";
    case Strategy::go_only:
      return "go_only";
    case Strategy::go_blended:
      return "go_blended";
    case Strategy::copo:
      return "copo";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  for (Strategy s : {Strategy::grpo, Strategy::dapo, Strategy::go_selective,
                     Strategy::go_only, Strategy::go_blended, Strategy::copo}) {
    if (name == strategy_name(s)) return s;
  }
  throw ConfigError("strategy", "unknown strategy '" + std::string(name) +
                                    "' (expected grpo, dapo, go_selective, "
                                    "go_only, go_blended or copo)");
}

std::vector<AdvantageAssignment> assemble(std::span<const GroupOutcome> batch,
                                          const BlendParams& params,
                                          Strategy strategy, double guard) {
  if (batch.size() < 2) {
    throw std::invalid_argument(
        "assemble: batch needs at least two prompts for global advantages");
  }
  params.validate();
  const std::size_t group_size = batch.front().rewards.size();

  std::vector<AdvantageAssignment> out(batch.size());
  std::vector<double> prompt_rewards(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const GroupOutcome& g = batch[j];
    if (g.rewards.size() != group_size || g.answers.size() != group_size) {
      throw std::invalid_argument("assemble: every group must have size G");
    }
    AdvantageAssignment& a = out[j];
    a.local = local_advantages(g.rewards, guard);
    const EntropyReport report = consistency_entropy(g.answers);
    a.entropy_bits = report.entropy_bits;
    a.prompt_reward = prompt_level_reward(g.rewards);
    prompt_rewards[j] = a.prompt_reward;

    const bool all_incorrect = all_equal(g.rewards, 0.0);
    switch (strategy) {
      case Strategy::grpo:
      case Strategy::dapo:
        a.weights = {1.0, 0.0};
        break;
      case Strategy::go_only:
        a.weights = {0.0, 1.0};
        break;
      case Strategy::go_selective:
        a.weights = all_incorrect ? BlendWeights{0.0, 1.0} : BlendWeights{1.0, 0.0};
        break;
      case Strategy::go_blended:
        a.weights = blend_weights(report, params);
        break;
      case Strategy::copo:
        a.weights = apply_zero_control(blend_weights(report, params), g.rewards);
        break;
    }
  }

  const std::vector<double> global = global_advantages(prompt_rewards, guard);
  for (std::size_t j = 0; j < batch.size(); ++j) out[j].global = global[j];
  return out;
}

}  // namespace copo
