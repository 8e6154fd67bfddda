// Experiment harness: runs trials across environments, runs, policies and
// regularizer values, aggregates selection quality, and writes a CSV of
// per-environment rows plus a JSON summary. Output bytes are independent of
// the worker count: work items are reduced in index order.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "syntax/env.hpp"
#include "syntax/policies.hpp"

namespace syntax {

struct LambdaMode {
  enum class Kind { Oracle, Fixed, Sweep };
  Kind kind = Kind::Oracle;
  double fixed = 1.0;
  std::vector<double> sweep;

  static LambdaMode oracle() { return {}; }
  static LambdaMode fixed_value(double v) {
    return {Kind::Fixed, v, {}};
  }
  static LambdaMode sweep_values(std::vector<double> vs) {
    return {Kind::Sweep, 1.0, std::move(vs)};
  }
};

struct ExperimentSpec {
  SimConfig sim;
  int horizon = 200;
  std::vector<PolicyType> policies = {
      PolicyType::Syntax, PolicyType::ConventionalStudy,
      PolicyType::ThresholdingBandits, PolicyType::SyntheticStudy,
      PolicyType::SyntheticDesign};
  int n_environments = 10;
  int n_runs = 1000;
  LambdaMode lambda_mode;
  // Used for policies that need a regularizer weight when the oracle is
  // unavailable (latent factors not recoverable). Unset means hard error.
  std::optional<double> lambda_fallback;
  std::string output_path = "out";
  int threads = 0;  // 0: SYNTAX_THREADS env var, then hardware concurrency

  void validate() const;
};

// Decade grid used when a sweep is requested without explicit values.
std::vector<double> default_lambda_sweep();

struct TrialResult {
  SelectionResult selection;
  std::vector<PolicyDecision> trace;
};

// Called after each recorded episode; used by instrumented tests.
using EpisodeHook = std::function<void(int episode, const TrialState&)>;

// Runs one trial to the horizon: warm start, policy decisions, selection.
// `lambda` is ignored by policies that do not take a regularizer weight;
// the policy's noise scale is the environment's. Estimator or policy errors
// abort the trial and are rethrown with the episode index and policy name
// attached.
TrialResult run_trial(const Environment& env, PolicyType type, int horizon,
                      double lambda, std::uint64_t trial_seed,
                      const EpisodeHook& hook = nullptr);
TrialResult run_trial(const Environment& env, const PolicyKind& kind,
                      int horizon, std::uint64_t trial_seed,
                      const EpisodeHook& hook = nullptr);

struct Rates {
  double fpr;  // NaN when the environment has no true negatives
  double tpr;  // NaN when the environment has no true positives
};
Rates fpr_tpr(const std::vector<int>& selected, const std::vector<int>& truth,
              int subpops);

// Fraction of recruited participants assigned to the treated arm.
double allocation_proportion(const std::vector<PolicyDecision>& trace);

// One CSV row: a policy crossed with an environment at one lambda value,
// averaged over runs. NaN rates are skipped in the run average; a cell with
// no defined runs stays NaN and is skipped again at summary level.
struct ReportRow {
  std::string policy;
  std::uint64_t environment_seed = 0;
  std::string regime;
  int horizon = 0;
  double lambda = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
  double alloc = 0.0;
};

struct PolicySummary {
  std::string policy;
  double lambda = 0.0;       // NaN when per-environment oracle values differ
  double fpr_mean = 0.0, fpr_se = 0.0;
  double tpr_mean = 0.0, tpr_se = 0.0;
  double alloc_mean = 0.0, alloc_se = 0.0;
  int environments = 0;      // environments contributing to the rate means
};

struct ExperimentReport {
  ExperimentSpec spec;
  std::vector<std::uint64_t> env_seeds;
  std::vector<double> lambda_values;  // one per sweep point; empty for oracle
  std::vector<ReportRow> rows;
  std::vector<PolicySummary> summaries;
  std::vector<std::string> failures;  // per-trial error annotations
  double wall_seconds = 0.0;
};

ExperimentReport run_experiment(const ExperimentSpec& spec);

// Deterministic serialization: doubles at full round-trip precision, rows
// in (lambda, policy, environment) order.
std::string to_csv(const ExperimentReport& report);
void write_report(const ExperimentReport& report, const std::string& out_dir);

int resolve_threads(int requested);

}  // namespace syntax
