#include "syntax/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

#include "syntax/estimator.hpp"
#include "syntax/json_io.hpp"

namespace syntax {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CellResult {
  double fpr = kNaN;
  double tpr = kNaN;
  double alloc = kNaN;
  bool failed = false;
  std::string error;
};

struct MeanAcc {
  double sum = 0.0;
  int n = 0;
  void add(double v) {
    if (!std::isnan(v)) {
      sum += v;
      ++n;
    }
  }
  double mean() const { return n > 0 ? sum / n : kNaN; }
};

// Sample-std-of-means / sqrt(count); zero when fewer than two samples.
std::pair<double, double> mean_se(const std::vector<double>& vals) {
  MeanAcc acc;
  for (double v : vals) acc.add(v);
  const double m = acc.mean();
  if (acc.n < 2) return {m, 0.0};
  double ss = 0.0;
  for (double v : vals)
    if (!std::isnan(v)) ss += (v - m) * (v - m);
  return {m, std::sqrt(ss / (acc.n - 1)) / std::sqrt(double(acc.n))};
}

}  // namespace

void ExperimentSpec::validate() const {
  sim.validate();
  if (horizon < 2 * sim.subpops)
    throw ValidationError(
        "horizon must be >= 2 * subpops (one warm-start episode per "
        "(subpopulation, group) cell)");
  if (n_environments < 1) throw ValidationError("environments must be >= 1");
  if (n_runs < 1) throw ValidationError("runs must be >= 1");
  if (policies.empty()) throw ValidationError("at least one policy required");
  std::set<PolicyType> uniq(policies.begin(), policies.end());
  if (uniq.size() != policies.size())
    throw ValidationError("duplicate policy in spec");
  if (lambda_mode.kind == LambdaMode::Kind::Fixed &&
      !(lambda_mode.fixed >= 0.0))
    throw ValidationError("lambda must be >= 0");
  if (lambda_mode.kind == LambdaMode::Kind::Sweep) {
    if (lambda_mode.sweep.empty())
      throw ValidationError("lambda sweep needs at least one value");
    for (double v : lambda_mode.sweep)
      if (!(v >= 0.0)) throw ValidationError("lambda must be >= 0");
  }
  if (lambda_fallback && !(*lambda_fallback >= 0.0))
    throw ValidationError("lambda_fallback must be >= 0");
  if (threads < 0) throw ValidationError("threads must be >= 0");
}

std::vector<double> default_lambda_sweep() {
  return {0.001, 0.01, 0.1, 1.0, 10.0, 100.0};
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SYNTAX_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

TrialResult run_trial(const Environment& env, PolicyType type, int horizon,
                      double lambda, std::uint64_t trial_seed,
                      const EpisodeHook& hook) {
  const PolicyKind kind = make_policy(
      type, requires_lambda(type) ? std::optional<double>(lambda) : std::nullopt,
      env.sigma);
  return run_trial(env, kind, horizon, trial_seed, hook);
}

TrialResult run_trial(const Environment& env, const PolicyKind& kind,
                      int horizon, std::uint64_t trial_seed,
                      const EpisodeHook& hook) {
  const int warm = warm_start_length(env.subpops());
  if (horizon < warm)
    throw ValidationError("horizon must be >= 2 * subpops");
  RngStream rng(trial_seed);
  TrialState state(env.features, env.periods());
  TrialResult result;
  result.trace.reserve(horizon);
  int episode = 0;
  try {
    for (episode = 0; episode < horizon; ++episode) {
      const PolicyDecision d = episode < warm
                                   ? warm_start_decision(env.subpops(), episode)
                                   : decide(kind, state, episode, rng);
      const Episode ep = sample_episode(env, d.subpop, d.group, rng);
      state.record(d.subpop, d.group, ep.pre, ep.final_outcome);
      result.trace.push_back(d);
      if (hook) hook(episode, state);
    }
    result.selection = finalize(kind, state);
  } catch (const std::exception& ex) {
    throw std::runtime_error(std::string("trial aborted: policy=") +
                             to_string(kind.type) + " episode=" +
                             std::to_string(episode) + ": " + ex.what());
  }
  return result;
}

Rates fpr_tpr(const std::vector<int>& selected, const std::vector<int>& truth,
              int subpops) {
  std::vector<char> sel(subpops, 0), pos(subpops, 0);
  for (int i : selected) sel.at(i) = 1;
  for (int i : truth) pos.at(i) = 1;
  int tp = 0, fp = 0, npos = 0, nneg = 0;
  for (int i = 0; i < subpops; ++i) {
    if (pos[i]) {
      ++npos;
      tp += sel[i];
    } else {
      ++nneg;
      fp += sel[i];
    }
  }
  Rates r;
  r.tpr = npos > 0 ? double(tp) / npos : kNaN;
  r.fpr = nneg > 0 ? double(fp) / nneg : kNaN;
  return r;
}

double allocation_proportion(const std::vector<PolicyDecision>& trace) {
  if (trace.empty()) throw ValidationError("allocation of an empty trace");
  int treated = 0;
  for (const auto& d : trace) treated += d.group;
  return double(treated) / double(trace.size());
}

ExperimentReport run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const auto t0 = std::chrono::steady_clock::now();

  ExperimentReport report;
  report.spec = spec;

  const int E = spec.n_environments;
  const int R = spec.n_runs;
  const int P = static_cast<int>(spec.policies.size());
  const std::uint64_t master = spec.sim.seed;

  std::vector<Environment> envs;
  std::vector<std::vector<int>> truths;
  envs.reserve(E);
  for (int e = 0; e < E; ++e) {
    const std::uint64_t env_seed = derive_seed(master, kTagEnvironment, e);
    report.env_seeds.push_back(env_seed);
    RngStream rng(env_seed);
    envs.push_back(generate_environment(spec.sim, rng));
    truths.push_back(true_positive_set(envs.back()));
  }

  // Regularizer weight per (sweep point, environment). The oracle reads each
  // environment's latent factors; when those are unrecoverable the configured
  // fallback applies, and with no fallback the error propagates.
  int L = 1;
  if (spec.lambda_mode.kind == LambdaMode::Kind::Sweep) {
    L = static_cast<int>(spec.lambda_mode.sweep.size());
    report.lambda_values = spec.lambda_mode.sweep;
  }
  std::vector<std::vector<double>> lambda_of(L, std::vector<double>(E));
  for (int e = 0; e < E; ++e) {
    switch (spec.lambda_mode.kind) {
      case LambdaMode::Kind::Oracle:
        try {
          lambda_of[0][e] = lambda_oracle(envs[e]).value;
        } catch (const RankDeficientError&) {
          if (!spec.lambda_fallback) throw;
          lambda_of[0][e] = *spec.lambda_fallback;
        }
        break;
      case LambdaMode::Kind::Fixed:
        lambda_of[0][e] = spec.lambda_mode.fixed;
        break;
      case LambdaMode::Kind::Sweep:
        for (int l = 0; l < L; ++l) lambda_of[l][e] = spec.lambda_mode.sweep[l];
        break;
    }
  }

  const std::size_t items = std::size_t(L) * E * R;
  std::vector<CellResult> cells(items * P);

  auto run_item = [&](std::size_t item) {
    const int l = static_cast<int>(item / (std::size_t(E) * R));
    const int e = static_cast<int>((item / R) % E);
    const int r = static_cast<int>(item % R);
    // Keyed by (environment, run) only: every policy and every sweep point
    // replays the same decision and noise stream.
    const std::uint64_t seed = derive_seed(master, kTagTrial, e, r);
    for (int p = 0; p < P; ++p) {
      CellResult& cell = cells[item * P + p];
      try {
        const TrialResult tr = run_trial(envs[e], spec.policies[p],
                                         spec.horizon, lambda_of[l][e], seed);
        const Rates rates =
            fpr_tpr(tr.selection.selected, truths[e], spec.sim.subpops);
        cell.fpr = rates.fpr;
        cell.tpr = rates.tpr;
        cell.alloc = allocation_proportion(tr.trace);
      } catch (const std::exception& ex) {
        cell.failed = true;
        cell.error = ex.what();
      }
    }
  };

  const int workers =
      std::max(1, std::min<int>(resolve_threads(spec.threads),
                                static_cast<int>(items)));
  if (workers == 1) {
    for (std::size_t item = 0; item < items; ++item) run_item(item);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t item = next.fetch_add(1);
          if (item >= items) return;
          try {
            run_item(item);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mu);
            if (!first_error) first_error = std::current_exception();
            return;
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  // Index-order reduction; identical bytes for any worker count.
  for (int l = 0; l < L; ++l) {
    for (int p = 0; p < P; ++p) {
      std::vector<double> env_fpr, env_tpr, env_alloc;
      for (int e = 0; e < E; ++e) {
        MeanAcc fpr, tpr, alloc;
        for (int r = 0; r < R; ++r) {
          const CellResult& cell =
              cells[((std::size_t(l) * E + e) * R + r) * P + p];
          if (cell.failed) {
            report.failures.push_back(
                std::string("policy=") + to_string(spec.policies[p]) +
                " lambda=" + format_double(lambda_of[l][e]) +
                " env=" + std::to_string(e) + " run=" + std::to_string(r) +
                ": " + cell.error);
            continue;
          }
          fpr.add(cell.fpr);
          tpr.add(cell.tpr);
          alloc.add(cell.alloc);
        }
        ReportRow row;
        row.policy = to_string(spec.policies[p]);
        row.environment_seed = report.env_seeds[e];
        row.regime = to_string(spec.sim.regime);
        row.horizon = spec.horizon;
        row.lambda = lambda_of[l][e];
        row.fpr = fpr.mean();
        row.tpr = tpr.mean();
        row.alloc = alloc.mean();
        report.rows.push_back(row);
        env_fpr.push_back(row.fpr);
        env_tpr.push_back(row.tpr);
        env_alloc.push_back(row.alloc);
      }
      PolicySummary s;
      s.policy = to_string(spec.policies[p]);
      const bool uniform_lambda =
          std::all_of(lambda_of[l].begin(), lambda_of[l].end(),
                      [&](double v) { return v == lambda_of[l][0]; });
      s.lambda = uniform_lambda ? lambda_of[l][0] : kNaN;
      std::tie(s.fpr_mean, s.fpr_se) = mean_se(env_fpr);
      std::tie(s.tpr_mean, s.tpr_se) = mean_se(env_tpr);
      std::tie(s.alloc_mean, s.alloc_se) = mean_se(env_alloc);
      int defined = 0;
      for (double v : env_fpr)
        if (!std::isnan(v)) ++defined;
      s.environments = defined;
      report.summaries.push_back(s);
    }
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

std::string to_csv(const ExperimentReport& report) {
  std::string out = "policy,environment_seed,regime,H,lambda,fpr,tpr,alloc\n";
  for (const auto& row : report.rows) {
    out += row.policy;
    out += ',';
    out += std::to_string(row.environment_seed);
    out += ',';
    out += row.regime;
    out += ',';
    out += std::to_string(row.horizon);
    out += ',';
    out += format_double(row.lambda);
    out += ',';
    out += format_double(row.fpr);
    out += ',';
    out += format_double(row.tpr);
    out += ',';
    out += format_double(row.alloc);
    out += '\n';
  }
  return out;
}

void write_report(const ExperimentReport& report, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream csv(out_dir + "/results.csv", std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + out_dir + "/results.csv");
    csv << to_csv(report);
  }
  {
    std::ofstream js(out_dir + "/summary.json", std::ios::binary);
    if (!js) throw std::runtime_error("cannot write " + out_dir + "/summary.json");
    js << summary_json(report).dump(2) << '\n';
  }
}

}  // namespace syntax
