#include "copo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "copo/simd/kernels.hpp"

namespace copo {

void TrainConfig::validate() const {
  if (group_size < 2) throw ConfigError("train.group_size", "must be >= 2");
  if (batch_size < 2) throw ConfigError("train.batch_size", "must be >= 2");
  if (mini_batches < 1) throw ConfigError("train.mini_batches", "must be >= 1");
  if (batch_size % mini_batches != 0) {
    throw ConfigError("train.mini_batches", "must divide train.batch_size");
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) {
    throw ConfigError("train.lr", "must be finite and > 0");
  }
  if (!(clip.low >= 0.0 && clip.low < 1.0)) {
    throw ConfigError("train.eps_low", "must be in [0, 1)");
  }
  if (!(clip.high >= 0.0) || !std::isfinite(clip.high)) {
    throw ConfigError("train.eps_high", "must be finite and >= 0");
  }
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw ConfigError("train.beta", "must be finite and >= 0");
  }
  try {
    blend.validate();
  } catch (const ConfigError& e) {
    throw ConfigError("train." + e.field(), e.what());
  }
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw ConfigError("train.weight_decay", "must be finite and >= 0");
  }
  if (!(std_guard >= 0.0)) throw ConfigError("train.std_guard", "must be >= 0");
}

AdamOptimizer::AdamOptimizer(const PolicyParams& shape)
    : m_(shape.flat().size(), 0.0), v_(shape.flat().size(), 0.0) {}

void AdamOptimizer::ascend(PolicyParams& policy, const PolicyParams& gradient,
                           double lr, double weight_decay) {
  if (policy.flat().size() != m_.size() ||
      gradient.flat().size() != m_.size()) {
    throw std::invalid_argument("AdamOptimizer: shape mismatch");
  }
  ++step_;
  simd::AdamCoeffs c;
  c.lr = lr;
  c.beta1 = kBeta1;
  c.beta2 = kBeta2;
  c.eps = kEps;
  c.weight_decay = weight_decay;
  c.bias_correction1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_));
  c.bias_correction2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_));
  simd::adam_ascent(policy.flat(), gradient.flat(), m_, v_, c);
}

std::vector<std::size_t> batch_prompts(const EnvSpec& env,
                                       const TrainConfig& config,
                                       std::size_t step) {
  const std::size_t num_prompts = env.prompts.size();
  std::vector<std::size_t> ids(config.batch_size);
  for (std::size_t j = 0; j < ids.size(); ++j) {
    ids[j] = (step * config.batch_size + j) % num_prompts;
  }
  Rng rng(stream_seed(config.seed, step, ~std::uint64_t{0}));
  for (std::size_t i = ids.size(); i > 1; --i) {
    std::swap(ids[i - 1], ids[rng() % i]);
  }
  return ids;
}

std::vector<ScoredGroup> rollout(const PolicyParams& old, const EnvSpec& env,
                                 const TrainConfig& config, std::size_t step,
                                 std::size_t jobs) {
  const std::vector<std::size_t> prompts = batch_prompts(env, config, step);
  std::vector<ScoredGroup> batch(prompts.size());

  auto sample_slots = [&](std::size_t worker, std::size_t stride) {
    for (std::size_t j = worker; j < prompts.size(); j += stride) {
      Rng rng(stream_seed(config.seed, step, j));
      ScoredGroup& sg = batch[j];
      sg.group = sample_group(old, prompts[j], config.group_size, rng);
      sg.answers = group_answers(sg.group, env.horizon);
      sg.rewards = group_rewards(sg.answers, env.prompts[prompts[j]].truth,
                                 config.reward);
    }
  };
  jobs = std::clamp<std::size_t>(jobs, 1, prompts.size());
  if (jobs == 1) {
    sample_slots(0, 1);
  } else {
    std::vector<std::jthread> workers;
    workers.reserve(jobs);
    for (std::size_t w = 0; w < jobs; ++w) workers.emplace_back(sample_slots, w, jobs);
  }

  std::vector<GroupOutcome> outcomes(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    outcomes[j] = {batch[j].rewards, batch[j].answers};
  }
  std::vector<AdvantageAssignment> adv =
      assemble(outcomes, config.blend, config.strategy, config.std_guard);
  for (std::size_t j = 0; j < batch.size(); ++j) {
    batch[j].advantage = std::move(adv[j]);
  }
  return batch;
}

DapoFiltered dapo_filter(std::vector<ScoredGroup> batch) {
  DapoFiltered out;
  const std::size_t total = batch.size();
  for (ScoredGroup& sg : batch) {
    if (all_equal(sg.rewards, 0.0) || all_equal(sg.rewards, 1.0)) continue;
    out.kept.push_back(std::move(sg));
  }
  out.filtered_fraction =
      total == 0 ? 0.0
                 : static_cast<double>(total - out.kept.size()) /
                       static_cast<double>(total);
  return out;
}

StepStats train_step(PolicyParams& policy, const PolicyParams& ref,
                     std::span<const ScoredGroup> batch,
                     const TrainConfig& config, AdamOptimizer& optimizer,
                     std::size_t step_index) {
  StepStats stats;
  const std::size_t n = batch.size();
  const std::size_t shards = config.mini_batches;
  for (std::size_t k = 0; k < shards; ++k) {
    const std::size_t begin = k * n / shards;
    const std::size_t end = (k + 1) * n / shards;
    if (begin == end) continue;
    SurrogateResult r = surrogate(policy, ref, batch.subspan(begin, end - begin),
                                  config.clip, config.beta, config.aggregation);
    const double sq = simd::sum_squares(r.gradient.flat());
    if (!std::isfinite(sq) || !std::isfinite(r.objective)) {
      throw NumericError(step_index, "non-finite surrogate gradient in shard " +
                                         std::to_string(k));
    }
    optimizer.ascend(policy, r.gradient, config.lr, config.weight_decay);
    ++stats.updates;
    stats.grad_norm += std::sqrt(sq);
    stats.kl_mean += r.kl;
    stats.objective += r.objective;
    stats.shard_objectives.push_back(r.objective);
  }
  if (stats.updates > 0) {
    const auto u = static_cast<double>(stats.updates);
    stats.grad_norm /= u;
    stats.kl_mean /= u;
    stats.objective /= u;
  }
  return stats;
}

namespace {

MetricsRecord batch_record(std::size_t step, const TrainConfig& config,
                           std::span<const ScoredGroup> batch) {
  MetricsRecord rec;
  rec.step = step;
  rec.strategy = std::string(strategy_name(config.strategy));
  std::vector<std::vector<double>> rewards;
  rewards.reserve(batch.size());
  double reward_sum = 0.0;
  std::size_t responses = 0;
  for (const ScoredGroup& sg : batch) {
    rewards.push_back(sg.rewards);
    for (double r : sg.rewards) reward_sum += r;
    responses += sg.rewards.size();
    rec.mean_entropy_bits += sg.advantage.entropy_bits;
    rec.mean_w_local += sg.advantage.weights.local;
  }
  const auto b = static_cast<double>(batch.size());
  rec.mean_reward = reward_sum / static_cast<double>(responses);
  rec.mean_entropy_bits /= b;
  rec.mean_w_local /= b;
  const std::vector<std::size_t> hist =
      group_accuracy_histogram(rewards, config.group_size);
  rec.frac_all_zero = static_cast<double>(hist.front()) / b;
  rec.frac_all_one = static_cast<double>(hist.back()) / b;
  return rec;
}

}  // namespace

TrainResult train_loop(const EnvSpec& env, const TrainConfig& config,
                       const TrainOptions& options) {
  env.validate();
  config.validate();
  TrainResult result;
  result.initial_policy = PolicyParams::initial(env);
  const PolicyParams& ref = result.initial_policy;
  PolicyParams policy = ref;
  AdamOptimizer optimizer(policy);

  for (std::size_t step = 0; step < config.steps; ++step) {
    const PolicyParams old = policy;
    std::vector<ScoredGroup> batch =
        rollout(old, env, config, step, options.jobs);
    MetricsRecord rec = batch_record(step, config, batch);

    StepStats stats;
    if (config.strategy == Strategy::dapo) {
      DapoFiltered filtered = dapo_filter(std::move(batch));
      rec.filtered_fraction = filtered.filtered_fraction;
      stats = train_step(policy, ref, filtered.kept, config, optimizer, step);
    } else {
      stats = train_step(policy, ref, batch, config, optimizer, step);
    }
    rec.grad_norm = stats.grad_norm;
    rec.kl_mean = stats.kl_mean;
    rec.hard_prompt_truth_prob = hard_prompt_truth_probability(policy, env);
    if (options.on_record) options.on_record(rec);
    result.records.push_back(std::move(rec));
  }
  result.final_policy = std::move(policy);
  return result;
}

}  // namespace copo
