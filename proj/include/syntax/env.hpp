// Synthetic panel generator: K subpopulations observed over T periods, the
// final period carrying an additive treatment effect. Outcomes follow a
// linear factor model with observable features and latent factor loadings.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "syntax/rng.hpp"

namespace syntax {

enum class FactorRegime { Diminishing, Increasing };
enum class Mismatch { None, SquaredFeatures, FullRankFactors };

const char* to_string(FactorRegime r);
const char* to_string(Mismatch m);
FactorRegime factor_regime_from_string(const std::string& s);
Mismatch mismatch_from_string(const std::string& s);

struct SimConfig {
  int subpops = 25;
  int periods = 5;  // includes the single post-treatment period
  int feature_dim = 2;
  int factor_dim = 2;
  double sigma = 1.0;
  FactorRegime regime = FactorRegime::Diminishing;
  Mismatch mismatch = Mismatch::None;
  std::uint64_t seed = 0;

  // Throws ValidationError naming the violated condition.
  void validate() const;

  // FullRankFactors forces the latent dimension up to the panel length.
  int effective_factor_dim() const;
};

struct Environment {
  Eigen::MatrixXd features;         // feature_dim x subpops, observable
  Eigen::MatrixXd loadings;         // factor_dim x subpops, latent
  Eigen::VectorXd intercepts;       // periods
  Eigen::MatrixXd feature_weights;  // feature_dim x periods
  Eigen::MatrixXd factors;          // factor_dim x periods, latent
  Eigen::VectorXd effects;          // subpops, treatment effect per subpop
  double sigma = 1.0;
  Mismatch mismatch = Mismatch::None;

  int subpops() const { return static_cast<int>(features.cols()); }
  int periods() const { return static_cast<int>(intercepts.size()); }
};

// Scale applied to the latent factor direction at 0-based period t of a
// panel with `periods` columns. Diminishing: 2 - 10^(t+1-periods);
// Increasing: 10^(t+1-periods). Both reach 1 at the final period.
double regime_multiplier(FactorRegime regime, int t, int periods);

// Draw order is fixed (features, loadings, intercepts, weight columns,
// factor columns, effects) so a given (config, seed) pins every matrix.
Environment generate_environment(const SimConfig& cfg, RngStream& rng);
Environment generate_environment(const SimConfig& cfg);  // stream from cfg.seed

// Uniform draw from the closed unit ball: Gaussian direction, radius u^(1/dim).
Eigen::VectorXd sample_unit_ball(int dim, RngStream& rng);

// Noiseless mean outcome for subpopulation i at 0-based period t, control
// arm. SquaredFeatures applies the feature weights to squared features.
double mean_response(const Environment& env, int subpop, int period);

struct Episode {
  Eigen::VectorXd pre;   // periods-1 noisy pre-treatment outcomes
  double final_outcome;  // noisy final-period outcome
};

// group: 0 = control, 1 = treated (adds the subpopulation effect).
Episode sample_episode(const Environment& env, int subpop, int group,
                       RngStream& rng);

// Subpopulations with strictly positive treatment effect, ascending.
std::vector<int> true_positive_set(const Environment& env);

}  // namespace syntax
