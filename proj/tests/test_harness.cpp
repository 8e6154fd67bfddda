#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "syntax/env.hpp"
#include "syntax/errors.hpp"
#include "syntax/harness.hpp"
#include "syntax/json_io.hpp"

using namespace syntax;

namespace {

SimConfig tiny_sim(std::uint64_t seed = 7) {
  SimConfig cfg;
  cfg.subpops = 4;
  cfg.periods = 3;
  cfg.feature_dim = 1;
  cfg.factor_dim = 1;
  cfg.seed = seed;
  return cfg;
}

ExperimentSpec tiny_spec() {
  ExperimentSpec spec;
  spec.sim = tiny_sim();
  spec.horizon = 24;
  spec.policies = {PolicyType::ConventionalStudy, PolicyType::Syntax};
  spec.n_environments = 2;
  spec.n_runs = 3;
  spec.lambda_mode = LambdaMode::fixed_value(0.5);
  return spec;
}

}  // namespace

TEST_CASE("rate computation with the empty-denominator convention") {
  const Rates r = fpr_tpr({1, 2}, {0, 1}, 4);
  CHECK(r.tpr == 0.5);
  CHECK(r.fpr == 0.5);

  const Rates perfect = fpr_tpr({0, 1}, {0, 1}, 4);
  CHECK(perfect.tpr == 1.0);
  CHECK(perfect.fpr == 0.0);

  const Rates no_neg = fpr_tpr({0}, {0, 1, 2, 3}, 4);
  CHECK(std::isnan(no_neg.fpr));
  CHECK(no_neg.tpr == 0.25);

  const Rates no_pos = fpr_tpr({0}, {}, 4);
  CHECK(std::isnan(no_pos.tpr));
  CHECK(no_pos.fpr == 0.25);
}

TEST_CASE("allocation proportion") {
  std::vector<PolicyDecision> trace;
  for (int e = 0; e < 10; ++e) trace.push_back({0, e % 2});
  CHECK(allocation_proportion(trace) == 0.5);
  for (auto& d : trace) d.group = 1;
  CHECK(allocation_proportion(trace) == 1.0);
  CHECK_THROWS_AS(allocation_proportion({}), ValidationError);
}

TEST_CASE("a horizon of exactly one warm start is the enumeration") {
  const Environment env = generate_environment(tiny_sim());
  const TrialResult tr =
      run_trial(env, PolicyType::Syntax, 8, 1.0, /*seed=*/11);
  REQUIRE(tr.trace.size() == 8);
  for (int e = 0; e < 8; ++e) {
    CHECK(tr.trace[e].subpop == e / 2);
    CHECK(tr.trace[e].group == e % 2);
  }
  CHECK(tr.selection.estimates.size() == 4);
}

TEST_CASE("trials are pure functions of their seed") {
  const Environment env = generate_environment(tiny_sim());
  for (PolicyType type :
       {PolicyType::Syntax, PolicyType::ConventionalStudy,
        PolicyType::ThresholdingBandits, PolicyType::SyntheticStudy,
        PolicyType::SyntheticDesign}) {
    const TrialResult a = run_trial(env, type, 20, 0.7, 333);
    const TrialResult b = run_trial(env, type, 20, 0.7, 333);
    CHECK(a.trace == b.trace);
    CHECK(a.selection.selected == b.selection.selected);
    CHECK((a.selection.estimates.array() == b.selection.estimates.array())
              .all());
  }
}

TEST_CASE("budget exactness at finalize") {
  const Environment env = generate_environment(tiny_sim());
  const EpisodeHook noop;
  const TrialResult tr = run_trial(env, PolicyType::ThresholdingBandits, 31,
                                   0.0, 5, noop);
  CHECK(tr.trace.size() == 31);
}

TEST_CASE("uniform kinds replay the same recruitment trace") {
  const Environment env = generate_environment(tiny_sim());
  const TrialResult conv =
      run_trial(env, PolicyType::ConventionalStudy, 40, 1.0, 77);
  const TrialResult synth =
      run_trial(env, PolicyType::SyntheticStudy, 40, 1.0, 77);
  CHECK(conv.trace == synth.trace);
  CHECK(!conv.selection.synthetic);
  CHECK(synth.selection.synthetic);
}

TEST_CASE("noiseless positive effects are all discovered") {
  SimConfig cfg = tiny_sim(99);
  cfg.sigma = 1e-9;
  Environment env = generate_environment(cfg);
  env.effects = env.effects.array().abs() + 0.1;
  for (PolicyType type :
       {PolicyType::Syntax, PolicyType::ConventionalStudy,
        PolicyType::ThresholdingBandits, PolicyType::SyntheticStudy,
        PolicyType::SyntheticDesign}) {
    const TrialResult tr = run_trial(env, type, 16, 1.0, 321);
    CHECK(tr.selection.selected == std::vector<int>{0, 1, 2, 3});
  }
}

TEST_CASE("trial failures carry episode and policy context") {
  const Environment env = generate_environment(tiny_sim());
  const EpisodeHook boom = [](int episode, const TrialState&) {
    if (episode == 9) throw std::runtime_error("instrument failure");
  };
  try {
    run_trial(env, PolicyType::ConventionalStudy, 20, 0.0, 1, boom);
    FAIL("expected abort");
  } catch (const std::runtime_error& ex) {
    const std::string msg = ex.what();
    CHECK(msg.find("policy=conventional") != std::string::npos);
    CHECK(msg.find("episode=9") != std::string::npos);
    CHECK(msg.find("instrument failure") != std::string::npos);
  }
  CHECK_THROWS_AS(run_trial(env, PolicyType::Syntax, 7, 1.0, 1),
                  ValidationError);  // horizon below the warm start
}

TEST_CASE("experiment spec validation") {
  ExperimentSpec spec = tiny_spec();
  spec.horizon = 7;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec = tiny_spec();
  spec.policies.clear();
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec = tiny_spec();
  spec.policies = {PolicyType::Syntax, PolicyType::Syntax};
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec = tiny_spec();
  spec.lambda_mode = LambdaMode::sweep_values({});
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  CHECK_NOTHROW(tiny_spec().validate());
}

TEST_CASE("degenerate aggregation equals the single trial") {
  ExperimentSpec spec = tiny_spec();
  spec.policies = {PolicyType::ConventionalStudy};
  spec.n_environments = 1;
  spec.n_runs = 1;
  const ExperimentReport report = run_experiment(spec);
  REQUIRE(report.rows.size() == 1);

  const std::uint64_t env_seed = derive_seed(spec.sim.seed, kTagEnvironment, 0);
  CHECK(report.env_seeds[0] == env_seed);
  RngStream rng(env_seed);
  const Environment env = generate_environment(spec.sim, rng);
  const TrialResult tr =
      run_trial(env, PolicyType::ConventionalStudy, spec.horizon, 0.5,
                derive_seed(spec.sim.seed, kTagTrial, 0, 0));
  const Rates rates =
      fpr_tpr(tr.selection.selected, true_positive_set(env), 4);
  CHECK(report.rows[0].fpr == rates.fpr);
  CHECK(report.rows[0].tpr == rates.tpr);
  CHECK(report.rows[0].alloc == allocation_proportion(tr.trace));
  CHECK(report.summaries[0].fpr_se == 0.0);
}

TEST_CASE("aggregation lies within the environment range") {
  ExperimentSpec spec = tiny_spec();
  spec.policies = {PolicyType::ConventionalStudy};
  spec.n_environments = 3;
  spec.n_runs = 4;
  const ExperimentReport report = run_experiment(spec);
  REQUIRE(report.rows.size() == 3);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  int defined = 0;
  for (const auto& row : report.rows) {
    if (std::isnan(row.tpr)) continue;
    lo = std::min(lo, row.tpr);
    hi = std::max(hi, row.tpr);
    sum += row.tpr;
    ++defined;
  }
  REQUIRE(defined > 0);
  const PolicySummary& s = report.summaries[0];
  CHECK(s.tpr_mean >= lo - 1e-12);
  CHECK(s.tpr_mean <= hi + 1e-12);
  CHECK(s.tpr_mean == doctest::Approx(sum / defined).epsilon(1e-12));
  // Standard error recomputed by hand.
  double ss = 0.0;
  for (const auto& row : report.rows)
    if (!std::isnan(row.tpr)) ss += (row.tpr - sum / defined) * (row.tpr - sum / defined);
  if (defined >= 2)
    CHECK(s.tpr_se ==
          doctest::Approx(std::sqrt(ss / (defined - 1) / defined))
              .epsilon(1e-12));
}

TEST_CASE("csv bytes are identical across executions and worker counts") {
  ExperimentSpec spec = tiny_spec();
  const std::string once = to_csv(run_experiment(spec));
  const std::string twice = to_csv(run_experiment(spec));
  CHECK(once == twice);
  spec.threads = 3;
  CHECK(to_csv(run_experiment(spec)) == once);
  spec.threads = 1;
  CHECK(to_csv(run_experiment(spec)) == once);

  // Shape: header plus one row per (policy, environment).
  int lines = 0;
  for (char c : once)
    if (c == '\n') ++lines;
  CHECK(lines == 1 + 2 * 2);
  CHECK(once.rfind("policy,environment_seed,regime,H,lambda,fpr,tpr,alloc\n",
                   0) == 0);
}

TEST_CASE("lambda modes resolve per environment") {
  SUBCASE("fixed value lands in every row") {
    ExperimentSpec spec = tiny_spec();
    spec.lambda_mode = LambdaMode::fixed_value(0.25);
    const ExperimentReport report = run_experiment(spec);
    for (const auto& row : report.rows) CHECK(row.lambda == 0.25);
  }
  SUBCASE("sweep emits one block per value") {
    ExperimentSpec spec = tiny_spec();
    spec.policies = {PolicyType::Syntax};
    spec.n_runs = 1;
    spec.lambda_mode = LambdaMode::sweep_values({0.1, 10.0});
    const ExperimentReport report = run_experiment(spec);
    REQUIRE(report.rows.size() == 4);  // 2 lambdas x 2 envs
    CHECK(report.rows[0].lambda == 0.1);
    CHECK(report.rows[2].lambda == 10.0);
    CHECK(report.lambda_values == std::vector<double>{0.1, 10.0});
  }
  SUBCASE("oracle reads the environment factors") {
    ExperimentSpec spec = tiny_spec();
    spec.policies = {PolicyType::ConventionalStudy};
    spec.n_runs = 1;
    spec.lambda_mode = LambdaMode::oracle();
    const ExperimentReport report = run_experiment(spec);
    for (int e = 0; e < spec.n_environments; ++e) {
      RngStream rng(report.env_seeds[e]);
      const Environment env = generate_environment(spec.sim, rng);
      CHECK(report.rows[e].lambda ==
            doctest::Approx(lambda_oracle(env).value).epsilon(1e-15));
    }
  }
  SUBCASE("unrecoverable factors fall back when configured") {
    ExperimentSpec spec = tiny_spec();
    spec.sim.mismatch = Mismatch::FullRankFactors;
    spec.policies = {PolicyType::ConventionalStudy};
    spec.n_runs = 1;
    spec.lambda_mode = LambdaMode::oracle();
    CHECK_THROWS_AS(run_experiment(spec), RankDeficientError);
    spec.lambda_fallback = 2.0;
    const ExperimentReport report = run_experiment(spec);
    for (const auto& row : report.rows) CHECK(row.lambda == 2.0);
  }
}

TEST_CASE("experiment spec JSON round trip") {
  ExperimentSpec spec = tiny_spec();
  spec.lambda_mode = LambdaMode::sweep_values({0.5, 5.0});
  spec.lambda_fallback = 1.5;
  spec.output_path = "out/tiny";
  const ExperimentSpec back = experiment_spec_from_json(to_json(spec));
  CHECK(back.sim.subpops == spec.sim.subpops);
  CHECK(back.sim.seed == spec.sim.seed);
  CHECK(back.horizon == spec.horizon);
  CHECK(back.policies == spec.policies);
  CHECK(back.n_environments == spec.n_environments);
  CHECK(back.n_runs == spec.n_runs);
  CHECK(back.lambda_mode.kind == LambdaMode::Kind::Sweep);
  CHECK(back.lambda_mode.sweep == spec.lambda_mode.sweep);
  CHECK(back.lambda_fallback == spec.lambda_fallback);
  CHECK(back.output_path == spec.output_path);

  CHECK_THROWS_AS(load_experiment_spec("/nonexistent/config.json"),
                  ValidationError);
}

TEST_CASE("report files are written and reloadable") {
  ExperimentSpec spec = tiny_spec();
  spec.policies = {PolicyType::ConventionalStudy};
  spec.n_runs = 1;
  const ExperimentReport report = run_experiment(spec);
  const std::string dir = "test_out_tmp";
  write_report(report, dir);
  std::ifstream csv(dir + "/results.csv");
  REQUIRE(bool(csv));
  std::string header;
  std::getline(csv, header);
  CHECK(header == "policy,environment_seed,regime,H,lambda,fpr,tpr,alloc");
  std::ifstream js(dir + "/summary.json");
  REQUIRE(bool(js));
  nlohmann::json j;
  js >> j;
  CHECK(j.at("summaries").size() == 1);
  CHECK(j.at("spec").at("horizon").get<int>() == spec.horizon);
  std::filesystem::remove_all(dir);
}

TEST_CASE("golden smoke selections stay pinned") {
  std::ifstream in(std::string(SYNTAX_GOLDEN_DIR) + "/smoke_selection.json");
  REQUIRE_MESSAGE(bool(in), "golden file missing; run syntax_golden_gen");
  nlohmann::json j;
  in >> j;

  SimConfig cfg = sim_config_from_json(j.at("sim"));
  RngStream env_rng(derive_seed(cfg.seed, kTagEnvironment, 0));
  const Environment env = generate_environment(cfg, env_rng);
  const int horizon = j.at("horizon").get<int>();
  const double lambda = j.at("lambda").get<double>();
  const std::uint64_t trial_seed = derive_seed(cfg.seed, kTagTrial, 0, 0);

  for (const auto& [name, selected] : j.at("selected").items()) {
    const TrialResult tr = run_trial(env, policy_from_string(name), horizon,
                                     lambda, trial_seed);
    CHECK_MESSAGE(tr.selection.selected == selected.get<std::vector<int>>(),
                  "policy ", name);
  }
}
