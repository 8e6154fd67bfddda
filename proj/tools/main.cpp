// Command-line front end: `syntax run --config <file> [overrides]` executes
// an experiment and writes results.csv + summary.json; `syntax report --in
// <dir>` pretty-prints a stored summary.
#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>

#include "syntax/harness.hpp"
#include "syntax/json_io.hpp"

namespace {

using nlohmann::json;

syntax::LambdaMode parse_lambda_flag(const std::string& s) {
  if (s == "oracle") return syntax::LambdaMode::oracle();
  if (s == "sweep")
    return syntax::LambdaMode::sweep_values(syntax::default_lambda_sweep());
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos == s.size()) return syntax::LambdaMode::fixed_value(v);
  } catch (const std::exception&) {
  }
  throw syntax::ValidationError(
      "--lambda must be 'oracle', 'sweep' or a number, got '" + s + "'");
}

void print_error(const std::exception& ex, const char* type) {
  json j;
  j["error"] = ex.what();
  j["type"] = type;
  std::cerr << j.dump() << std::endl;
}

std::string percent(const json& rate) {
  if (rate.is_null()) return "   --  ";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%6.2f%%", rate.get<double>() * 100.0);
  return buf;
}

int run_command(const std::string& config_path,
                const std::vector<std::string>& policies,
                std::optional<int> horizon, std::optional<int> runs,
                std::optional<int> envs, std::optional<std::string> regime,
                std::optional<std::string> mismatch,
                std::optional<std::string> lambda,
                std::optional<std::uint64_t> seed,
                std::optional<std::string> out, std::optional<int> threads) {
  syntax::ExperimentSpec spec = syntax::load_experiment_spec(config_path);
  if (!policies.empty()) {
    spec.policies.clear();
    for (const auto& p : policies)
      spec.policies.push_back(syntax::policy_from_string(p));
  }
  if (horizon) spec.horizon = *horizon;
  if (runs) spec.n_runs = *runs;
  if (envs) spec.n_environments = *envs;
  if (regime) spec.sim.regime = syntax::factor_regime_from_string(*regime);
  if (mismatch) spec.sim.mismatch = syntax::mismatch_from_string(*mismatch);
  if (lambda) spec.lambda_mode = parse_lambda_flag(*lambda);
  if (seed) spec.sim.seed = *seed;
  if (out) spec.output_path = *out;
  if (threads) spec.threads = *threads;
  spec.validate();

  const syntax::ExperimentReport report = syntax::run_experiment(spec);
  syntax::write_report(report, spec.output_path);
  std::cout << "wrote " << spec.output_path << "/results.csv and summary.json ("
            << report.rows.size() << " rows, " << report.wall_seconds
            << "s)\n";
  if (!report.failures.empty())
    std::cout << report.failures.size()
              << " trial(s) failed; see summary.json\n";
  return 0;
}

int report_command(const std::string& in_dir) {
  std::ifstream in(in_dir + "/summary.json");
  if (!in)
    throw syntax::ValidationError("cannot open " + in_dir + "/summary.json");
  json j;
  in >> j;

  const json& spec = j.at("spec");
  std::printf("regime=%s H=%d runs=%dx%d lambda=%s\n",
              spec.at("sim").at("regime").get<std::string>().c_str(),
              spec.at("horizon").get<int>(),
              spec.at("environments").get<int>(), spec.at("runs").get<int>(),
              spec.at("lambda").dump().c_str());
  std::printf("%-18s %-8s %-18s %-18s %-10s\n", "policy", "lambda",
              "FPR (se)", "TPR (se)", "alloc");
  for (const auto& s : j.at("summaries")) {
    const json& lam = s.at("lambda");
    char lam_buf[32];
    if (lam.is_null())
      std::snprintf(lam_buf, sizeof(lam_buf), "oracle");
    else
      std::snprintf(lam_buf, sizeof(lam_buf), "%g", lam.get<double>());
    std::printf("%-18s %-8s %s (%4.2f%%)  %s (%4.2f%%)  %6.3f\n",
                s.at("policy").get<std::string>().c_str(), lam_buf,
                percent(s.at("fpr").at("mean")).c_str(),
                s.at("fpr").at("se").get<double>() * 100.0,
                percent(s.at("tpr").at("mean")).c_str(),
                s.at("tpr").at("se").get<double>() * 100.0,
                s.at("alloc").at("mean").get<double>());
  }
  const auto& failures = j.at("failures");
  if (!failures.empty())
    std::printf("%zu trial(s) failed\n", failures.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive experiment design simulator"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment spec");
  std::string config_path;
  std::vector<std::string> policies;
  std::optional<int> horizon, runs, envs, threads;
  std::optional<std::string> regime, mismatch, lambda, out;
  std::optional<std::uint64_t> seed;
  run->add_option("--config", config_path, "Experiment config (JSON)")
      ->required();
  run->add_option("--policies", policies,
                  "Policy subset: syntax conventional thresholding "
                  "synthetic-study synthetic-design");
  run->add_option("--horizon", horizon, "Episodes per trial");
  run->add_option("--runs", runs, "Runs per environment");
  run->add_option("--envs", envs, "Number of environments");
  run->add_option("--regime", regime, "diminishing|increasing");
  run->add_option("--mismatch", mismatch, "none|squared|fullrank");
  run->add_option("--lambda", lambda, "oracle|<float>|sweep");
  run->add_option("--seed", seed, "Master seed");
  run->add_option("--out", out, "Output directory");
  run->add_option("--threads", threads, "Worker threads (0 = auto)");

  auto* report = app.add_subcommand("report", "Pretty-print a summary");
  std::string in_dir;
  report->add_option("--in", in_dir, "Directory with summary.json")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run)
      return run_command(config_path, policies, horizon, runs, envs, regime,
                         mismatch, lambda, seed, out, threads);
    return report_command(in_dir);
  } catch (const syntax::ValidationError& ex) {
    print_error(ex, "ValidationError");
  } catch (const syntax::RankDeficientError& ex) {
    print_error(ex, "RankDeficientError");
  } catch (const std::exception& ex) {
    print_error(ex, "RuntimeError");
  }
  return 1;
}
