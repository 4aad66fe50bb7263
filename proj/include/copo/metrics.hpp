#pragma once

// Evaluation metrics, batch telemetry and the metrics file format.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "copo/reward.hpp"
#include "copo/toylm.hpp"
#include "copo/types.hpp"

namespace copo {

struct MetricsRecord {
  std::size_t step = 0;
  std::string strategy;
  double mean_reward = 0.0;
  double frac_all_zero = 0.0;
  double frac_all_one = 0.0;
  double mean_entropy_bits = 0.0;
  double mean_w_local = 0.0;
  double grad_norm = 0.0;
  double kl_mean = 0.0;
  double hard_prompt_truth_prob = 0.0;
  double filtered_fraction = 0.0;

  bool operator==(const MetricsRecord&) const = default;
};

inline constexpr const char* kMetricsHeader =
    "step,strategy,mean_reward,frac_all_zero,frac_all_one,mean_entropy_bits,"
    "mean_w_local,grad_norm,kl_mean,hard_prompt_truth_prob,filtered_fraction";

// Fraction of rewards equal to 1.
double mean_at_k(std::span<const double> rewards);

// Most frequent answer (ties to the smallest, null before tokens).
Answer majority_answer(std::span<const Answer> answers);

// 1 if the majority answer equals truth, else 0.
int maj_at_k(std::span<const Answer> answers, Token truth);

// counts[c] = number of groups with exactly c rewards equal to 1.
std::vector<std::size_t> group_accuracy_histogram(
    std::span<const std::vector<double>> batch_rewards, std::size_t group_size);

// Renders a value with 9 significant digits.
std::string format_value(double value);

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const MetricsRecord& record);
void write_jsonl_row(std::ostream& out, const MetricsRecord& record);

// Writes header plus one row per record. Throws std::runtime_error naming
// the path on I/O failure.
void emit_csv(const std::filesystem::path& path,
              std::span<const MetricsRecord> records);
void emit_jsonl(const std::filesystem::path& path,
                std::span<const MetricsRecord> records);

std::vector<MetricsRecord> parse_csv(std::istream& in);
std::vector<MetricsRecord> read_csv(const std::filesystem::path& path);

struct EvalSummary {
  double mean_at_k = 0.0;  // averaged over prompts
  double maj_at_k = 0.0;   // fraction of prompts with a correct majority
};

// Samples k responses per environment prompt from `policy`.
EvalSummary evaluate(const PolicyParams& policy, const EnvSpec& env,
                     std::size_t k, std::uint64_t seed, RewardSpec spec);

}  // namespace copo
