// Treatment-effect estimators over a TrialState: the naive two-arm
// difference and the synthetic-control estimator with its variance bound.
// The synthetic weights solve an equality-constrained quadratic program;
// see solve_beta for the contract and BetaSolver for the reusable core.
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "syntax/trial_state.hpp"

namespace syntax {

struct EstimatorConfig {
  double lambda = 1.0;  // weight on the latent-mismatch variance term
  double sigma = 1.0;   // outcome noise scale; argmins are invariant to it
};

// Result of a weight solve for one target subpopulation. beta has one entry
// per subpopulation; entries outside the solver's active set are zero.
struct Weights {
  Eigen::VectorXd beta;
  int target = 0;
  double objective_value = 0.0;  // attained variance bound, includes sigma^2
  bool fallback = false;         // true when the solver fell back to the
                                 // single-indicator weights
};

// Difference of final-period arm means. Throws UndefinedMeanError if either
// arm of the subpopulation is empty.
double naive_estimate(const TrialState& state, int subpop);

// Exact single-indicator weights (beta = e_target) with objective filled in.
Weights unit_weights(const TrialState& state, int target,
                     const EstimatorConfig& cfg,
                     const Counts* n_override = nullptr);

// Variance bound of the synthetic estimator at the given weights:
// sigma^2 (1/n1_t + sum_j beta_j^2 / n0_j + lambda sum_j (beta_j - e_t)^2 / n_j).
// Sums skip exact structural zeros, so zero-count inactive subpopulations
// contribute nothing.
double variance_bound(const Weights& w, const TrialState& state,
                      const EstimatorConfig& cfg,
                      const Counts* n_override = nullptr);

// Synthetic point estimate: treated final mean of the target minus the
// beta-weighted control final means. Skips exact zero weights, so it equals
// naive_estimate bitwise when beta is the exact indicator vector.
double synthetic_estimate(const TrialState& state, const Weights& w);

// |synthetic estimate at the optimal weights| / sqrt(attained bound).
double sensitivity_index(const TrialState& state, int subpop,
                         const EstimatorConfig& cfg);

// Reusable solver for the weight program. The equality constraints (feature
// match, pre-treatment mean match, sum to one) do not depend on the target,
// so one factorization per counts configuration serves every target; only
// the right-hand side and the linear objective term change.
//
// Active set: subpopulations with total count >= 1 and control count >= 1.
// Weights outside it are pinned to zero. The target must be active and have
// a treated observation. Guards: if the KKT solution violates a constraint
// beyond the residual tolerance, or attains a genuinely worse objective
// than the single-indicator weights, the solver returns those weights with
// the fallback flag set; objective ties within roundoff return the
// indicator unflagged, since it is then itself the constrained optimum.
// The solver never throws for solvable-but-degenerate systems.
class BetaSolver {
 public:
  BetaSolver(const TrialState& state, const EstimatorConfig& cfg);

  // Recomputes the active set and refactorizes if needed. `counts` may be a
  // hypothetical (e.g. one episode ahead); it replaces the state's counts.
  void set_counts(const Counts& counts);

  Weights solve(int target) const;

  // Same computation without materializing the weight vector.
  double objective_value(int target) const;

  static constexpr double kResidualTol = 1e-6;
  static constexpr double kSumTol = 1e-8;
  static constexpr double kSnapTol = 1e-12;
  static constexpr double kTieTol = 1e-9;  // relative objective-tie window

 private:
  struct SolveOut {
    double objective;
    bool fallback;
  };
  SolveOut solve_into(int target, Eigen::VectorXd& beta_active) const;
  double indicator_objective(int target) const;

  const TrialState* state_;
  EstimatorConfig cfg_;
  Counts counts_;
  std::vector<int> active_;           // active subpopulation indices
  std::vector<int> active_pos_;       // subpop -> position in active_, or -1
  Eigen::MatrixXd constraints_;       // m x |active|
  Eigen::VectorXd qdiag_;             // |active|, sigma^2-free quadratic diag
  Eigen::MatrixXd gram_;              // m x m Schur complement
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> gram_cod_;
  mutable Eigen::VectorXd rhs_, multipliers_, beta_buf_, resid_;
};

// One-call convenience wrapper around BetaSolver.
Weights solve_beta(const TrialState& state, int target,
                   const EstimatorConfig& cfg,
                   const Counts* n_override = nullptr);

struct LambdaOracle {
  double value;        // squared norm of the min-norm factor reconstruction
  double upper_bound;  // (||final factor|| / smallest positive singular
                       // value of the pre-treatment factor block)^2
};

// Recovers the regularizer weight from the latent factor matrix
// (factor_dim x periods): the squared norm of the minimum-norm solution of
// pre_block * x = final_column. Throws RankDeficientError when the
// pre-treatment block loses full row rank.
LambdaOracle lambda_oracle(const Eigen::MatrixXd& factors);

struct Environment;
LambdaOracle lambda_oracle(const Environment& env);

}  // namespace syntax
