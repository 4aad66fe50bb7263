#include "copo/check.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <string>

#include "copo/surrogate.hpp"
#include "copo/toylm.hpp"

namespace copo {

std::vector<GroupOutcome> worked_example_batch() {
  std::vector<GroupOutcome> batch = {
      {{1, 0, 0, 0, 0, 0}, {2, 3, 3, 3, 4, 4}},
      {{0, 0, 0, 0, 0, 1}, {3, 3, 3, 4, 4, 2}},
      {{1, 1, 1, 1, 0, 0}, {2, 2, 2, 2, 3, 5}},
      {{1, 1, 1, 0, 0, 0}, {2, 2, 2, 3, 3, 4}},
      {{1, 1, 1, 0, 0, 0}, {2, 2, 2, 5, 5, 5}},
  };
  return batch;
}

namespace {

class Reporter {
 public:
  explicit Reporter(std::ostream& out) : out_(out) {}

  void expect_near(const std::string& what, double actual, double expected,
                   double tol) {
    const bool ok = std::abs(actual - expected) <= tol;
    record(ok, what, expected, actual);
  }

  void expect_exact(const std::string& what, double actual, double expected) {
    record(actual == expected, what, expected, actual);
  }

  void expect(const std::string& what, bool ok) {
    out_ << (ok ? "ok    " : "FAIL  ") << what << '\n';
    failures_ += ok ? 0 : 1;
  }

  bool passed() const { return failures_ == 0; }

 private:
  void record(bool ok, const std::string& what, double expected,
              double actual) {
    out_ << (ok ? "ok    " : "FAIL  ") << what;
    if (!ok) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", actual);
      char want[64];
      std::snprintf(want, sizeof want, "%.17g", expected);
      out_ << " (expected " << want << ", actual " << buf << ')';
    }
    out_ << '\n';
    failures_ += ok ? 0 : 1;
  }

  std::ostream& out_;
  int failures_ = 0;
};

void golden(Reporter& rep) {
  const std::vector<GroupOutcome> batch = worked_example_batch();
  const GroupOutcome& target = batch[kWorkedExamplePrompt];

  const std::vector<double> local = local_advantages(target.rewards);
  const double expected_local[] = {1, 1, 1, -1, -1, -1};
  for (std::size_t i = 0; i < local.size(); ++i) {
    rep.expect_exact("local advantage[" + std::to_string(i) + "]", local[i],
                     expected_local[i]);
  }
  rep.expect_exact("prompt-level reward", prompt_level_reward(target.rewards), 0.5);

  std::vector<double> prompt_rewards;
  for (const GroupOutcome& g : batch) {
    prompt_rewards.push_back(prompt_level_reward(g.rewards));
  }
  const GroupStats stats = group_stats(prompt_rewards);
  rep.expect_near("batch mean of prompt rewards", stats.mean, 0.4, 1e-12);
  rep.expect_near("batch std of prompt rewards", stats.std, 0.2, 1e-12);

  const std::vector<double> global = global_advantages(prompt_rewards);
  const double expected_global[] = {-7.0 / 6.0, -7.0 / 6.0, 4.0 / 3.0, 0.5, 0.5};
  for (std::size_t j = 0; j < global.size(); ++j) {
    rep.expect_near("global advantage[" + std::to_string(j) + "]", global[j],
                    expected_global[j], 1e-9);
  }

  const EntropyReport report = consistency_entropy(target.answers);
  rep.expect_near("consistency entropy (bits)", report.entropy_bits, 1.459, 1e-3);
  const BlendWeights w = blend_weights(report, BlendParams{3.0, 1.0});
  rep.expect_near("w_local (gamma=3, rho=1)", w.local, 0.799, 1e-3);
  rep.expect_near("w_global (gamma=3, rho=1)", w.global, 0.201, 1e-3);

  const std::vector<AdvantageAssignment> assigned =
      assemble(batch, BlendParams{3.0, 1.0}, Strategy::copo);
  const AdvantageAssignment& a = assigned[kWorkedExamplePrompt];
  rep.expect("assembled assignment matches the component values",
             a.local == local && a.global == global[kWorkedExamplePrompt] &&
                 a.weights.local == w.local && a.weights.global == w.global);
}

void quick_suite(Reporter& rep) {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> unit(-3.0, 3.0);

  bool standardize_ok = true;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(6);
    for (double& x : v) x = unit(rng);
    const GroupStats s = group_stats(standardize(v));
    standardize_ok &= std::abs(s.mean) <= 1e-12 && std::abs(s.std - 1.0) <= 1e-12;
  }
  rep.expect("standardized output has zero mean and unit std", standardize_ok);

  bool uniform_zero = true;
  for (double c : {0.0, 0.1, 1.0, 0.7}) {
    for (double a : local_advantages(std::vector<double>(6, c))) {
      uniform_zero &= a == 0.0;
    }
  }
  rep.expect("uniform rewards give identically zero local advantages",
             uniform_zero);

  bool weights_ok = true;
  for (int trial = 0; trial < 50; ++trial) {
    const BlendWeights w =
        blend_weights(std::abs(unit(rng)), BlendParams{1.0 + std::abs(unit(rng)), 1.0});
    weights_ok &= w.local + w.global == 1.0;
  }
  rep.expect("w_local + w_global == 1", weights_ok);

  // Zero advantages with beta = 0 leave the gradient exactly zero.
  EnvSpec env = make_env(6, 3, -1.0, 1, -1.0, 1, 1.0);
  PolicyParams policy = PolicyParams::initial(env);
  for (double& z : policy.flat()) z += unit(rng);
  Rng sampler(7);
  ScoredGroup sg;
  sg.group = sample_group(policy, 0, 6, sampler);
  sg.rewards.assign(6, 0.0);
  sg.advantage.local.assign(6, 0.0);
  sg.advantage.weights = {1.0, 0.0};
  const std::vector<ScoredGroup> groups{sg};
  const SurrogateResult r =
      surrogate(policy, policy, groups, ClipRange{}, 0.0, Aggregation::sample_mean);
  bool zero_grad = true;
  for (double g : r.gradient.flat()) zero_grad &= g == 0.0;
  rep.expect("zero advantages give an exactly zero surrogate gradient", zero_grad);

  const PolicyParams ref = PolicyParams::initial(env);
  rep.expect("KL(policy || ref) >= 0 and KL(ref || ref) == 0",
             exact_kl(policy, ref, groups, Aggregation::sample_mean) >= 0.0 &&
                 exact_kl(ref, ref, groups, Aggregation::sample_mean) == 0.0);
}

}  // namespace

bool run_check(std::ostream& out) {
  Reporter rep(out);
  out << "worked example\n";
  golden(rep);
  out << "invariants\n";
  quick_suite(rep);
  out << (rep.passed() ? "check passed\n" : "check FAILED\n");
  return rep.passed();
}

}  // namespace copo
