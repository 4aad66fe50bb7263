#include "copo/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace copo {

double mean_at_k(std::span<const double> rewards) {
  if (rewards.empty()) throw std::invalid_argument("mean_at_k: k must be >= 1");
  std::size_t hits = 0;
  for (double r : rewards) hits += r == 1.0 ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(rewards.size());
}

Answer majority_answer(std::span<const Answer> answers) {
  if (answers.empty()) throw std::invalid_argument("maj_at_k: k must be >= 1");
  std::map<Answer, std::size_t> counts;
  for (const Answer& a : answers) ++counts[a];
  Answer best;
  std::size_t best_count = 0;
  for (const auto& [answer, count] : counts) {
    if (count > best_count) {
      best_count = count;
      best = answer;
    }
  }
  return best;
}

int maj_at_k(std::span<const Answer> answers, Token truth) {
  const Answer mode = majority_answer(answers);
  return mode.has_value() && *mode == truth ? 1 : 0;
}

std::vector<std::size_t> group_accuracy_histogram(
    std::span<const std::vector<double>> batch_rewards,
    std::size_t group_size) {
  std::vector<std::size_t> counts(group_size + 1, 0);
  for (const std::vector<double>& group : batch_rewards) {
    if (group.size() != group_size) {
      throw std::invalid_argument("group_accuracy_histogram: non-uniform G");
    }
    std::size_t correct = 0;
    for (double r : group) correct += r == 1.0 ? 1 : 0;
    ++counts[correct];
  }
  return counts;
}

std::string format_value(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

void write_csv_header(std::ostream& out) { out << kMetricsHeader << '\n'; }

void write_csv_row(std::ostream& out, const MetricsRecord& r) {
  out << r.step << ',' << r.strategy << ',' << format_value(r.mean_reward)
      << ',' << format_value(r.frac_all_zero) << ','
      << format_value(r.frac_all_one) << ','
      << format_value(r.mean_entropy_bits) << ','
      << format_value(r.mean_w_local) << ',' << format_value(r.grad_norm)
      << ',' << format_value(r.kl_mean) << ','
      << format_value(r.hard_prompt_truth_prob) << ','
      << format_value(r.filtered_fraction) << '\n';
}

void write_jsonl_row(std::ostream& out, const MetricsRecord& r) {
  // Values go through format_value so the log carries the same precision
  // as the comma-separated file.
  auto num = [](double v) { return nlohmann::json::parse(format_value(v)); };
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["strategy"] = r.strategy;
  j["mean_reward"] = num(r.mean_reward);
  j["frac_all_zero"] = num(r.frac_all_zero);
  j["frac_all_one"] = num(r.frac_all_one);
  j["mean_entropy_bits"] = num(r.mean_entropy_bits);
  j["mean_w_local"] = num(r.mean_w_local);
  j["grad_norm"] = num(r.grad_norm);
  j["kl_mean"] = num(r.kl_mean);
  j["hard_prompt_truth_prob"] = num(r.hard_prompt_truth_prob);
  j["filtered_fraction"] = num(r.filtered_fraction);
  out << j.dump() << '\n';
}

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

double parse_double(const std::string& field, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != field.size() || field.empty()) {
    throw std::runtime_error("metrics line " + std::to_string(line) +
                             ": bad number '" + field + "'");
  }
  return v;
}

}  // namespace

void emit_csv(const std::filesystem::path& path,
              std::span<const MetricsRecord> records) {
  std::ofstream out = open_for_write(path);
  write_csv_header(out);
  for (const MetricsRecord& r : records) write_csv_row(out, r);
  finish(out, path);
}

void emit_jsonl(const std::filesystem::path& path,
                std::span<const MetricsRecord> records) {
  std::ofstream out = open_for_write(path);
  for (const MetricsRecord& r : records) write_jsonl_row(out, r);
  finish(out, path);
}

std::vector<MetricsRecord> parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw std::runtime_error("metrics file: missing or unexpected header");
  }
  std::vector<MetricsRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 11) {
      throw std::runtime_error("metrics line " + std::to_string(line_no) +
                               ": expected 11 fields");
    }
    MetricsRecord r;
    r.step = static_cast<std::size_t>(parse_double(fields[0], line_no));
    r.strategy = fields[1];
    double* targets[] = {&r.mean_reward,   &r.frac_all_zero,
                         &r.frac_all_one,  &r.mean_entropy_bits,
                         &r.mean_w_local,  &r.grad_norm,
                         &r.kl_mean,       &r.hard_prompt_truth_prob,
                         &r.filtered_fraction};
    for (std::size_t i = 0; i < 9; ++i) {
      *targets[i] = parse_double(fields[i + 2], line_no);
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<MetricsRecord> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  try {
    return parse_csv(in);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

EvalSummary evaluate(const PolicyParams& policy, const EnvSpec& env,
                     std::size_t k, std::uint64_t seed, RewardSpec spec) {
  if (k < 1) throw std::invalid_argument("evaluate: k must be >= 1");
  // Evaluation streams live outside the training step range.
  constexpr std::uint64_t kEvalStream = 0xe7a1'0000'0000'0000ULL;
  EvalSummary summary;
  for (const PromptSpec& p : env.prompts) {
    Rng rng(stream_seed(seed, kEvalStream, p.id));
    std::vector<Answer> answers;
    answers.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
      answers.push_back(
          extract_answer(sample_response(policy, p.id, rng).tokens, env.horizon));
    }
    const std::vector<double> rewards = group_rewards(answers, p.truth, spec);
    summary.mean_at_k += mean_at_k(rewards);
    summary.maj_at_k += maj_at_k(answers, p.truth);
  }
  const auto n = static_cast<double>(env.prompts.size());
  summary.mean_at_k /= n;
  summary.maj_at_k /= n;
  return summary;
}

}  // namespace copo
