// copo_lab: train, sweep, check and report on the tabular COPO laboratory.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "copo/check.hpp"
#include "copo/config.hpp"
#include "copo/metrics.hpp"
#include "copo/simd/kernels.hpp"
#include "copo/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::string seed;
  std::size_t jobs = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Experiment config file");
  cmd->add_option("--set", args.overrides, "Override key=value (repeatable)");
  cmd->add_option("--out", args.out_dir, "Output directory");
  cmd->add_option("--seed", args.seed, "Base seed (overrides train.seed)");
  cmd->add_option("--jobs", args.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

copo::ConfigBuilder load_builder(const CommonArgs& args) {
  copo::ConfigBuilder builder;
  if (!args.config_path.empty()) builder.load_file(args.config_path);
  for (const std::string& o : args.overrides) builder.apply_override(o);
  if (!args.seed.empty()) builder.set("train.seed", args.seed);
  if (!args.out_dir.empty()) {
    builder.set("output_dir", args.out_dir);
  } else if (!builder.is_set("output_dir")) {
    const char* env_out = std::getenv("COPO_LAB_OUT");
    builder.set("output_dir", env_out && *env_out ? env_out : "copo_lab_out");
  }
  return builder;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

std::string policy_json(const copo::PolicyParams& policy) {
  nlohmann::ordered_json j;
  j["num_prompts"] = policy.num_prompts();
  j["horizon"] = policy.horizon();
  j["vocab_size"] = policy.vocab_size();
  j["contexts"] = policy.contexts();
  j["layout"] = "prompt, position, context, token";
  j["logits"] = std::vector<double>(policy.flat().begin(), policy.flat().end());
  return j.dump(1) + "\n";
}

struct RunOutcome {
  copo::TrainResult result;
  copo::EvalSummary eval;
};

// Runs one experiment and writes its artifacts into `dir`.
RunOutcome run_experiment(const copo::ConfigBuilder& builder,
                          const copo::ExperimentConfig& cfg,
                          const fs::path& dir, std::size_t jobs) {
  fs::create_directories(dir);
  write_text(dir / "config.resolved", builder.snapshot());
  copo::TrainOptions options;
  options.jobs = jobs;
  RunOutcome outcome;
  outcome.result = copo::train_loop(cfg.env, cfg.train, options);
  copo::emit_csv(dir / "metrics.csv", outcome.result.records);
  if (cfg.jsonl) copo::emit_jsonl(dir / "metrics.jsonl", outcome.result.records);
  write_text(dir / "policy.json", policy_json(outcome.result.final_policy));
  outcome.eval = copo::evaluate(outcome.result.final_policy, cfg.env, cfg.eval_k,
                                cfg.train.seed, cfg.train.reward);
  return outcome;
}

int cmd_train(const CommonArgs& args) {
  if (!args.config_path.empty() && !fs::exists(args.config_path)) {
    std::cerr << "error: config file not found: " << args.config_path << '\n';
    return kExitUsage;
  }
  copo::ConfigBuilder builder;
  copo::ExperimentConfig cfg;
  try {
    builder = load_builder(args);
    cfg = builder.build();
  } catch (const std::exception& e) {
    std::cerr << "error: invalid config: " << e.what() << '\n';
    return kExitUsage;
  }
  try {
    const RunOutcome run = run_experiment(builder, cfg, cfg.output_dir, args.jobs);
    std::cout << "strategy " << copo::strategy_name(cfg.train.strategy) << ", "
              << run.result.records.size() << " steps, mean@" << cfg.eval_k
              << " " << copo::format_value(run.eval.mean_at_k) << ", maj@"
              << cfg.eval_k << " " << copo::format_value(run.eval.maj_at_k)
              << "\nwrote " << (cfg.output_dir / "metrics.csv").string() << '\n';
  } catch (const copo::NumericError& e) {
    std::cerr << "error: training diverged at step " << e.step() << ": "
              << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

struct SweepCell {
  double gamma = 0.0;
  double rho = 0.0;
  std::string strategy;
};

// Soft-blending rows of the reference ablation.
std::vector<SweepCell> reference_grid() {
  return {{3, 1, "copo"},    {5, 1, "copo"},    {10, 1, "copo"},
          {20, 0.5, "copo"}, {20, 1.2, "copo"}, {20, 1.5, "copo"}};
}

SweepCell parse_cell(const std::string& text) {
  std::stringstream ss(text);
  std::string g, r, s;
  if (!std::getline(ss, g, ':') || !std::getline(ss, r, ':') ||
      !std::getline(ss, s) || s.empty()) {
    throw copo::ConfigError("--cell", "expected gamma:rho:strategy, got '" + text + "'");
  }
  try {
    return {std::stod(g), std::stod(r), s};
  } catch (const std::exception&) {
    throw copo::ConfigError("--cell", "bad number in '" + text + "'");
  }
}

std::string cell_name(std::size_t index, const SweepCell& c) {
  std::ostringstream name;
  name << "cell" << std::setw(3) << std::setfill('0') << index << '_'
       << c.strategy << "_g" << copo::format_value(c.gamma) << "_r"
       << copo::format_value(c.rho);
  return name.str();
}

int cmd_sweep(const CommonArgs& args, const std::vector<double>& gammas,
              const std::vector<double>& rhos,
              const std::vector<std::string>& strategies,
              const std::vector<std::string>& cell_specs,
              const std::string& preset) {
  if (!args.config_path.empty() && !fs::exists(args.config_path)) {
    std::cerr << "error: config file not found: " << args.config_path << '\n';
    return kExitUsage;
  }
  std::vector<SweepCell> cells;
  copo::ConfigBuilder base;
  copo::ExperimentConfig base_cfg;
  try {
    if (preset == "reference") {
      cells = reference_grid();
    } else if (!preset.empty()) {
      throw copo::ConfigError("--grid", "unknown preset '" + preset + "'");
    }
    for (const std::string& spec : cell_specs) cells.push_back(parse_cell(spec));
    for (const std::string& s : strategies) {
      for (double g : gammas) {
        for (double r : rhos) cells.push_back({g, r, s});
      }
    }
    base = load_builder(args);
    base_cfg = base.build();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  if (cells.empty()) {
    std::cerr << "error: empty sweep grid (use --gamma/--rho/--strategy, --cell "
                 "or --grid reference)\n";
    return kExitUsage;
  }

  struct CellResult {
    std::string status = "ok";
    copo::EvalSummary eval;
    double hard_truth = 0.0;
    std::uint64_t seed = 0;
  };
  std::vector<CellResult> results(cells.size());
  const fs::path out_dir = base_cfg.output_dir;
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const SweepCell& c = cells[i];
      CellResult& res = results[i];
      res.seed = base_cfg.train.seed + i;
      try {
        copo::ConfigBuilder b = base;
        b.set("train.gamma", copo::format_exact(c.gamma));
        b.set("train.rho", copo::format_exact(c.rho));
        b.set("train.strategy", c.strategy);
        b.set("train.seed", std::to_string(res.seed));
        const copo::ExperimentConfig cfg = b.build();
        const RunOutcome run = run_experiment(b, cfg, out_dir / cell_name(i, c), 1);
        res.eval = run.eval;
        res.hard_truth = run.result.records.empty()
                             ? 0.0
                             : run.result.records.back().hard_prompt_truth_prob;
      } catch (const std::exception& e) {
        res.status = std::string("failed: ") + e.what();
      }
    }
  };
  {
    const std::size_t n = std::min(args.jobs, cells.size());
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < n; ++w) pool.emplace_back(worker);
    worker();
  }

  std::ostringstream summary;
  summary << "cell,strategy,gamma,rho,seed,status,mean_at_k,maj_at_k,"
             "hard_prompt_truth_prob\n";
  bool any_failed = false;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const CellResult& r = results[i];
    any_failed |= r.status != "ok";
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    summary << cell_name(i, cells[i]) << ',' << cells[i].strategy << ','
            << copo::format_value(cells[i].gamma) << ','
            << copo::format_value(cells[i].rho) << ',' << r.seed << ','
            << status << ',' << copo::format_value(r.eval.mean_at_k) << ','
            << copo::format_value(r.eval.maj_at_k) << ','
            << copo::format_value(r.hard_truth) << '\n';
  }
  try {
    fs::create_directories(out_dir);
    write_text(out_dir / "summary.csv", summary.str());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  std::cout << summary.str();
  return any_failed ? kExitRuntime : kExitOk;
}

int cmd_report(const std::string& path) {
  std::vector<copo::MetricsRecord> records;
  try {
    records = copo::read_csv(path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  const char* cols[] = {"step",   "strategy", "reward", "all0",  "all1",
                        "H_bits", "w_local",  "|grad|", "kl",    "hard_p",
                        "filtered"};
  for (const char* c : cols) std::cout << std::setw(12) << c;
  std::cout << '\n';
  for (const copo::MetricsRecord& r : records) {
    std::cout << std::setw(12) << r.step << std::setw(12) << r.strategy;
    for (double v : {r.mean_reward, r.frac_all_zero, r.frac_all_one,
                     r.mean_entropy_bits, r.mean_w_local, r.grad_norm, r.kl_mean,
                     r.hard_prompt_truth_prob, r.filtered_fraction}) {
      std::ostringstream cell;
      cell << std::setprecision(5) << v;
      std::cout << std::setw(12) << cell.str();
    }
    std::cout << '\n';
  }
  if (!records.empty()) {
    const auto& first = records.front();
    const auto& last = records.back();
    std::cout << "\n" << records.size() << " records; mean reward "
              << copo::format_value(first.mean_reward) << " -> "
              << copo::format_value(last.mean_reward)
              << "; hard-prompt truth probability "
              << copo::format_value(first.hard_prompt_truth_prob) << " -> "
              << copo::format_value(last.hard_prompt_truth_prob) << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consistency-aware policy optimization laboratory"};
  app.require_subcommand(1);

  CommonArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Run one training experiment");
  add_common(train, train_args);

  CommonArgs sweep_args;
  std::vector<double> gammas;
  std::vector<double> rhos;
  std::vector<std::string> strategies;
  std::vector<std::string> cells;
  std::string preset;
  CLI::App* sweep = app.add_subcommand("sweep", "Run a gamma x rho x strategy grid");
  add_common(sweep, sweep_args);
  sweep->add_option("--gamma", gammas, "Gamma values")->delimiter(',');
  sweep->add_option("--rho", rhos, "Rho values")->delimiter(',');
  sweep->add_option("--strategy", strategies, "Strategies")->delimiter(',');
  sweep->add_option("--cell", cells, "Explicit gamma:rho:strategy cell");
  sweep->add_option("--grid", preset, "Preset grid ('reference')");

  CLI::App* check = app.add_subcommand("check", "Replay the worked example");

  std::string report_path;
  CLI::App* report = app.add_subcommand("report", "Pretty-print a metrics file");
  report->add_option("metrics", report_path, "Metrics CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*train) return cmd_train(train_args);
  if (*sweep) return cmd_sweep(sweep_args, gammas, rhos, strategies, cells, preset);
  if (*check) {
    std::cout << "kernels: " << copo::simd::isa_name(copo::simd::active().isa)
              << '\n';
    return copo::run_check(std::cout) ? kExitOk : kExitRuntime;
  }
  if (*report) return cmd_report(report_path);
  return kExitUsage;
}
