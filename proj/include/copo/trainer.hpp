#pragma once

// Training loop: rollout under a frozen old policy, advantage assembly per
// strategy, and mini-batch Adam ascent on the blended surrogate.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "copo/advantage.hpp"
#include "copo/metrics.hpp"
#include "copo/reward.hpp"
#include "copo/surrogate.hpp"
#include "copo/toylm.hpp"

namespace copo {

struct TrainConfig {
  Strategy strategy = Strategy::copo;
  std::size_t group_size = 6;
  std::size_t batch_size = 16;
  std::size_t mini_batches = 4;
  double lr = 5e-2;
  ClipRange clip;
  double beta = 0.04;
  BlendParams blend;
  Aggregation aggregation = Aggregation::sample_mean;
  RewardSpec reward;
  std::size_t steps = 300;
  std::uint64_t seed = 0;
  double weight_decay = 0.0;
  double std_guard = kDefaultStdGuard;

  void validate() const;  // throws ConfigError naming the field
};

class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  explicit AdamOptimizer(const PolicyParams& shape);

  // In-place ascent step along `gradient`.
  void ascend(PolicyParams& policy, const PolicyParams& gradient, double lr,
              double weight_decay);

  std::size_t step() const { return step_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

 private:
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t step_ = 0;
};

// Prompts for one batch: round-robin over the environment, then shuffled by
// (seed, step).
std::vector<std::size_t> batch_prompts(const EnvSpec& env,
                                       const TrainConfig& config,
                                       std::size_t step);

// Samples and scores one batch under `old`. `jobs` worker threads sample
// prompts in parallel; the result does not depend on `jobs`.
std::vector<ScoredGroup> rollout(const PolicyParams& old, const EnvSpec& env,
                                 const TrainConfig& config, std::size_t step,
                                 std::size_t jobs = 1);

struct DapoFiltered {
  std::vector<ScoredGroup> kept;
  double filtered_fraction = 0.0;
};

// Drops groups whose rewards are all 0 or all 1 (binary correctness).
DapoFiltered dapo_filter(std::vector<ScoredGroup> batch);

struct StepStats {
  std::size_t updates = 0;
  double grad_norm = 0.0;  // mean L2 norm over shards
  double kl_mean = 0.0;
  double objective = 0.0;
  std::vector<double> shard_objectives;
};

// One pass over the batch in `config.mini_batches` shards, one Adam update
// per nonempty shard. Throws NumericError on a non-finite gradient.
StepStats train_step(PolicyParams& policy, const PolicyParams& ref,
                     std::span<const ScoredGroup> batch,
                     const TrainConfig& config, AdamOptimizer& optimizer,
                     std::size_t step_index = 0);

struct TrainResult {
  std::vector<MetricsRecord> records;
  PolicyParams initial_policy;
  PolicyParams final_policy;
};

struct TrainOptions {
  std::size_t jobs = 1;
  std::function<void(const MetricsRecord&)> on_record;
};

TrainResult train_loop(const EnvSpec& env, const TrainConfig& config,
                       const TrainOptions& options = {});

}  // namespace copo
