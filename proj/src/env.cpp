#include "syntax/env.hpp"

#include <cmath>
#include <stdexcept>

#include "syntax/errors.hpp"

namespace syntax {

const char* to_string(FactorRegime r) {
  switch (r) {
    case FactorRegime::Diminishing: return "diminishing";
    case FactorRegime::Increasing: return "increasing";
  }
  throw std::out_of_range("unknown factor regime");
}

const char* to_string(Mismatch m) {
  switch (m) {
    case Mismatch::None: return "none";
    case Mismatch::SquaredFeatures: return "squared";
    case Mismatch::FullRankFactors: return "fullrank";
  }
  throw std::out_of_range("unknown mismatch mode");
}

FactorRegime factor_regime_from_string(const std::string& s) {
  if (s == "diminishing") return FactorRegime::Diminishing;
  if (s == "increasing") return FactorRegime::Increasing;
  throw ValidationError("regime must be 'diminishing' or 'increasing', got '" +
                        s + "'");
}

Mismatch mismatch_from_string(const std::string& s) {
  if (s == "none") return Mismatch::None;
  if (s == "squared") return Mismatch::SquaredFeatures;
  if (s == "fullrank") return Mismatch::FullRankFactors;
  throw ValidationError("mismatch must be 'none', 'squared' or 'fullrank', got '" +
                        s + "'");
}

void SimConfig::validate() const {
  if (subpops < 2) throw ValidationError("subpops must be >= 2");
  if (periods < 2) throw ValidationError("periods must be >= 2");
  if (feature_dim < 1) throw ValidationError("feature_dim must be >= 1");
  if (factor_dim < 1) throw ValidationError("factor_dim must be >= 1");
  if (!(sigma > 0.0)) throw ValidationError("sigma must be > 0");
  // The weight program constrains feature and pre-period matches plus the
  // simplex sum; it needs slack subpopulations to have any freedom left.
  if (feature_dim + factor_dim >= subpops)
    throw ValidationError("feature_dim + factor_dim must be < subpops");
}

int SimConfig::effective_factor_dim() const {
  return mismatch == Mismatch::FullRankFactors ? periods : factor_dim;
}

double regime_multiplier(FactorRegime regime, int t, int periods) {
  const double p = std::pow(10.0, static_cast<double>(t + 1 - periods));
  return regime == FactorRegime::Diminishing ? 2.0 - p : p;
}

Eigen::VectorXd sample_unit_ball(int dim, RngStream& rng) {
  Eigen::VectorXd v(dim);
  double norm = 0.0;
  do {
    for (int d = 0; d < dim; ++d) v[d] = rng.normal();
    norm = v.norm();
  } while (norm == 0.0);
  const double radius = std::pow(rng.uniform01(), 1.0 / dim);
  return v * (radius / norm);
}

Environment generate_environment(const SimConfig& cfg, RngStream& rng) {
  cfg.validate();
  const int K = cfg.subpops;
  const int T = cfg.periods;
  const int dz = cfg.effective_factor_dim();

  Environment env;
  env.sigma = cfg.sigma;
  env.mismatch = cfg.mismatch;

  env.features.resize(cfg.feature_dim, K);
  for (int i = 0; i < K; ++i)
    for (int d = 0; d < cfg.feature_dim; ++d) env.features(d, i) = rng.normal();

  env.loadings.resize(dz, K);
  for (int i = 0; i < K; ++i)
    for (int d = 0; d < dz; ++d) env.loadings(d, i) = rng.normal();

  env.intercepts.resize(T);
  for (int t = 0; t < T; ++t) env.intercepts[t] = rng.normal();

  env.feature_weights.resize(cfg.feature_dim, T);
  for (int t = 0; t < T; ++t)
    env.feature_weights.col(t) = sample_unit_ball(cfg.feature_dim, rng);

  env.factors.resize(dz, T);
  for (int t = 0; t < T; ++t)
    env.factors.col(t) =
        regime_multiplier(cfg.regime, t, T) * sample_unit_ball(dz, rng);

  env.effects.resize(K);
  for (int i = 0; i < K; ++i) env.effects[i] = rng.normal();

  return env;
}

Environment generate_environment(const SimConfig& cfg) {
  RngStream rng(cfg.seed);
  return generate_environment(cfg, rng);
}

double mean_response(const Environment& env, int subpop, int period) {
  if (subpop < 0 || subpop >= env.subpops())
    throw std::out_of_range("subpop out of range");
  if (period < 0 || period >= env.periods())
    throw std::out_of_range("period out of range");
  const auto x = env.features.col(subpop);
  const auto w = env.feature_weights.col(period);
  const double feature_term = env.mismatch == Mismatch::SquaredFeatures
                                  ? w.dot(x.array().square().matrix())
                                  : w.dot(x);
  return env.intercepts[period] + feature_term +
         env.factors.col(period).dot(env.loadings.col(subpop));
}

Episode sample_episode(const Environment& env, int subpop, int group,
                       RngStream& rng) {
  if (group != 0 && group != 1)
    throw std::out_of_range("group must be 0 or 1");
  const int T = env.periods();
  Episode ep;
  ep.pre.resize(T - 1);
  for (int t = 0; t < T - 1; ++t)
    ep.pre[t] = mean_response(env, subpop, t) + env.sigma * rng.normal();
  ep.final_outcome = mean_response(env, subpop, T - 1) +
                     (group == 1 ? env.effects[subpop] : 0.0) +
                     env.sigma * rng.normal();
  return ep;
}

std::vector<int> true_positive_set(const Environment& env) {
  std::vector<int> out;
  for (int i = 0; i < env.subpops(); ++i)
    if (env.effects[i] > 0.0) out.push_back(i);
  return out;
}

}  // namespace syntax
