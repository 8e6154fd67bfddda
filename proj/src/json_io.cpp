#include "syntax/json_io.hpp"

#include <cmath>
#include <fstream>

#include "syntax/errors.hpp"

namespace syntax {

namespace {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array()) throw ValidationError("matrix must be an array of rows");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = 0;
  if (rows > 0) cols = static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j.at(r);
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw ValidationError("matrix rows must have equal length");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(c).get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  if (!j.is_array()) throw ValidationError("vector must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
  return v;
}

json json_rate(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

}  // namespace

nlohmann::json to_json(const Weights& w) {
  return {{"beta", vector_to_json(w.beta)},
          {"target", w.target},
          {"objective_value", w.objective_value},
          {"fallback", w.fallback}};
}

nlohmann::json to_json(const SimConfig& cfg) {
  return {{"subpops", cfg.subpops},
          {"periods", cfg.periods},
          {"feature_dim", cfg.feature_dim},
          {"factor_dim", cfg.factor_dim},
          {"sigma", cfg.sigma},
          {"regime", to_string(cfg.regime)},
          {"mismatch", to_string(cfg.mismatch)},
          {"seed", cfg.seed}};
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
  SimConfig cfg;
  if (j.contains("subpops")) cfg.subpops = j.at("subpops").get<int>();
  if (j.contains("periods")) cfg.periods = j.at("periods").get<int>();
  if (j.contains("feature_dim"))
    cfg.feature_dim = j.at("feature_dim").get<int>();
  if (j.contains("factor_dim")) cfg.factor_dim = j.at("factor_dim").get<int>();
  if (j.contains("sigma")) cfg.sigma = j.at("sigma").get<double>();
  if (j.contains("regime"))
    cfg.regime = factor_regime_from_string(j.at("regime").get<std::string>());
  if (j.contains("mismatch"))
    cfg.mismatch = mismatch_from_string(j.at("mismatch").get<std::string>());
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.validate();
  return cfg;
}

nlohmann::json to_json(const Environment& env) {
  return {{"X", matrix_to_json(env.features)},
          {"Z", matrix_to_json(env.loadings)},
          {"delta", vector_to_json(env.intercepts)},
          {"W", matrix_to_json(env.feature_weights)},
          {"M", matrix_to_json(env.factors)},
          {"r", vector_to_json(env.effects)},
          {"sigma", env.sigma},
          {"mismatch", to_string(env.mismatch)}};
}

Environment environment_from_json(const nlohmann::json& j) {
  Environment env;
  env.features = matrix_from_json(j.at("X"));
  env.loadings = matrix_from_json(j.at("Z"));
  env.intercepts = vector_from_json(j.at("delta"));
  env.feature_weights = matrix_from_json(j.at("W"));
  env.factors = matrix_from_json(j.at("M"));
  env.effects = vector_from_json(j.at("r"));
  env.sigma = j.at("sigma").get<double>();
  env.mismatch = mismatch_from_string(j.at("mismatch").get<std::string>());
  if (env.loadings.cols() != env.features.cols() ||
      env.effects.size() != env.features.cols())
    throw ValidationError("environment matrices disagree on subpops");
  if (env.feature_weights.cols() != env.intercepts.size() ||
      env.factors.cols() != env.intercepts.size())
    throw ValidationError("environment matrices disagree on periods");
  return env;
}

nlohmann::json to_json(const ExperimentSpec& spec) {
  json j;
  j["sim"] = to_json(spec.sim);
  j["horizon"] = spec.horizon;
  json pol = json::array();
  for (PolicyType p : spec.policies) pol.push_back(to_string(p));
  j["policies"] = std::move(pol);
  j["environments"] = spec.n_environments;
  j["runs"] = spec.n_runs;
  switch (spec.lambda_mode.kind) {
    case LambdaMode::Kind::Oracle:
      j["lambda"] = "oracle";
      break;
    case LambdaMode::Kind::Fixed:
      j["lambda"] = spec.lambda_mode.fixed;
      break;
    case LambdaMode::Kind::Sweep:
      j["lambda"] = spec.lambda_mode.sweep;
      break;
  }
  if (spec.lambda_fallback) j["lambda_fallback"] = *spec.lambda_fallback;
  j["out"] = spec.output_path;
  j["threads"] = spec.threads;
  return j;
}

ExperimentSpec experiment_spec_from_json(const nlohmann::json& j) {
  ExperimentSpec spec;
  if (j.contains("sim")) spec.sim = sim_config_from_json(j.at("sim"));
  if (j.contains("horizon")) spec.horizon = j.at("horizon").get<int>();
  if (j.contains("policies")) {
    spec.policies.clear();
    for (const auto& p : j.at("policies"))
      spec.policies.push_back(policy_from_string(p.get<std::string>()));
  }
  if (j.contains("environments"))
    spec.n_environments = j.at("environments").get<int>();
  if (j.contains("runs")) spec.n_runs = j.at("runs").get<int>();
  if (j.contains("lambda")) {
    const json& lam = j.at("lambda");
    if (lam.is_string()) {
      const std::string s = lam.get<std::string>();
      if (s == "oracle")
        spec.lambda_mode = LambdaMode::oracle();
      else if (s == "sweep")
        spec.lambda_mode = LambdaMode::sweep_values(default_lambda_sweep());
      else
        throw ValidationError("lambda must be 'oracle', 'sweep', a number or "
                              "an array of numbers");
    } else if (lam.is_array()) {
      spec.lambda_mode =
          LambdaMode::sweep_values(lam.get<std::vector<double>>());
    } else if (lam.is_number()) {
      spec.lambda_mode = LambdaMode::fixed_value(lam.get<double>());
    } else {
      throw ValidationError("lambda must be 'oracle', 'sweep', a number or "
                            "an array of numbers");
    }
  }
  if (j.contains("lambda_fallback"))
    spec.lambda_fallback = j.at("lambda_fallback").get<double>();
  if (j.contains("out")) spec.output_path = j.at("out").get<std::string>();
  if (j.contains("threads")) spec.threads = j.at("threads").get<int>();
  spec.validate();
  return spec;
}

ExperimentSpec load_experiment_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw ValidationError("config parse error in " + path + ": " + ex.what());
  }
  return experiment_spec_from_json(j);
}

nlohmann::json summary_json(const ExperimentReport& report) {
  json j;
  j["spec"] = to_json(report.spec);
  j["master_seed"] = report.spec.sim.seed;
  j["environment_seeds"] = report.env_seeds;
  if (!report.lambda_values.empty()) j["lambda_values"] = report.lambda_values;
  json sums = json::array();
  for (const auto& s : report.summaries) {
    json e;
    e["policy"] = s.policy;
    e["lambda"] = json_rate(s.lambda);
    e["fpr"] = {{"mean", json_rate(s.fpr_mean)}, {"se", s.fpr_se}};
    e["tpr"] = {{"mean", json_rate(s.tpr_mean)}, {"se", s.tpr_se}};
    e["alloc"] = {{"mean", json_rate(s.alloc_mean)}, {"se", s.alloc_se}};
    e["environments"] = s.environments;
    sums.push_back(std::move(e));
  }
  j["summaries"] = std::move(sums);
  j["failures"] = report.failures;
  j["wall_seconds"] = report.wall_seconds;
  return j;
}

}  // namespace syntax
