#include "syntax/estimator.hpp"

#include <cmath>
#include <stdexcept>

#include "syntax/env.hpp"

namespace syntax {

namespace {

void check_target(const TrialState& state, int target) {
  if (target < 0 || target >= state.subpops())
    throw std::out_of_range("target subpopulation out of range");
}

void check_lambda(double lambda) {
  if (!(lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
}

void check_sigma(double sigma) {
  if (!(sigma > 0.0)) throw ValidationError("sigma must be > 0");
}

}  // namespace

double naive_estimate(const TrialState& state, int subpop) {
  check_target(state, subpop);
  return state.final_mean(subpop, 1) - state.final_mean(subpop, 0);
}

double variance_bound(const Weights& w, const TrialState& state,
                      const EstimatorConfig& cfg, const Counts* n_override) {
  check_lambda(cfg.lambda);
  check_sigma(cfg.sigma);
  check_target(state, w.target);
  if (w.beta.size() != state.subpops())
    throw ValidationError("beta length must equal the subpopulation count");
  const Counts& n = n_override ? *n_override : state.counts();
  const int t = w.target;
  if (n(t, 1) < 1)
    throw UndefinedMeanError(
        "variance bound undefined: target subpopulation " + std::to_string(t) +
        " has no treated samples");
  double acc = 1.0 / n(t, 1);
  for (int j = 0; j < state.subpops(); ++j) {
    if (w.beta[j] == 0.0) continue;  // structural zero, skip the count read
    if (n(j, 0) < 1)
      throw UndefinedMeanError(
          "variance bound undefined: subpopulation " + std::to_string(j) +
          " has weight but no control samples");
    acc += w.beta[j] * w.beta[j] / n(j, 0);
  }
  for (int j = 0; j < state.subpops(); ++j) {
    const double d = w.beta[j] - (j == t ? 1.0 : 0.0);
    if (d == 0.0) continue;
    if (n.total(j) < 1)
      throw UndefinedMeanError(
          "variance bound undefined: subpopulation " + std::to_string(j) +
          " has weight but no samples");
    acc += cfg.lambda * d * d / n.total(j);
  }
  return cfg.sigma * cfg.sigma * acc;
}

Weights unit_weights(const TrialState& state, int target,
                     const EstimatorConfig& cfg, const Counts* n_override) {
  check_target(state, target);
  Weights w;
  w.beta = Eigen::VectorXd::Zero(state.subpops());
  w.beta[target] = 1.0;
  w.target = target;
  w.objective_value = variance_bound(w, state, cfg, n_override);
  return w;
}

double synthetic_estimate(const TrialState& state, const Weights& w) {
  check_target(state, w.target);
  if (w.beta.size() != state.subpops())
    throw ValidationError("beta length must equal the subpopulation count");
  double control = 0.0;
  for (int j = 0; j < state.subpops(); ++j) {
    if (w.beta[j] == 0.0) continue;
    control += w.beta[j] * state.final_mean(j, 0);
  }
  return state.final_mean(w.target, 1) - control;
}

BetaSolver::BetaSolver(const TrialState& state, const EstimatorConfig& cfg)
    : state_(&state), cfg_(cfg) {
  check_lambda(cfg_.lambda);
  check_sigma(cfg_.sigma);
  active_pos_.assign(state.subpops(), -1);
  set_counts(state.counts());
}

void BetaSolver::set_counts(const Counts& counts) {
  if (counts.subpops() != state_->subpops())
    throw ValidationError("count matrix size must match the trial state");
  counts_ = counts;

  // A subpopulation enters the program only when its means exist in the
  // state and the effective counts keep every division finite.
  std::vector<int> active;
  active.reserve(state_->subpops());
  for (int j = 0; j < state_->subpops(); ++j) {
    const bool data_ok = state_->count_total(j) >= 1 && state_->count(j, 0) >= 1;
    const bool count_ok = counts_.total(j) >= 1 && counts_(j, 0) >= 1;
    if (data_ok && count_ok) active.push_back(j);
  }

  const int na = static_cast<int>(active.size());
  const int dx = static_cast<int>(state_->features().rows());
  const int pre_rows = static_cast<int>(state_->pre_means_raw().rows());
  const int m = dx + pre_rows + 1;

  if (active != active_) {
    active_ = std::move(active);
    std::fill(active_pos_.begin(), active_pos_.end(), -1);
    for (int k = 0; k < na; ++k) active_pos_[active_[k]] = k;
    constraints_.resize(m, na);
    for (int k = 0; k < na; ++k) {
      constraints_.col(k).head(dx) = state_->features().col(active_[k]);
      constraints_.col(k).segment(dx, pre_rows) =
          state_->pre_means_raw().col(active_[k]);
      constraints_(m - 1, k) = 1.0;
    }
  }

  // sigma^2-free quadratic diagonal; argmins are scale invariant in sigma.
  qdiag_.resize(na);
  for (int k = 0; k < na; ++k) {
    const int j = active_[k];
    qdiag_[k] = 1.0 / counts_(j, 0) + cfg_.lambda / counts_.total(j);
  }
  gram_.noalias() = constraints_ * qdiag_.cwiseInverse().asDiagonal() *
                    constraints_.transpose();
  gram_cod_.compute(gram_);

  rhs_.resize(m);
  multipliers_.resize(m);
  beta_buf_.resize(na);
  resid_.resize(m);
}

double BetaSolver::indicator_objective(int target) const {
  return cfg_.sigma * cfg_.sigma *
         (1.0 / counts_(target, 1) + 1.0 / counts_(target, 0));
}

BetaSolver::SolveOut BetaSolver::solve_into(int target,
                                            Eigen::VectorXd& beta) const {
  check_target(*state_, target);
  const int pos = active_pos_[target];
  if (pos < 0)
    throw UndefinedMeanError(
        "weights undefined: target subpopulation " + std::to_string(target) +
        " is inactive (needs at least one sample and one control sample)");
  if (counts_(target, 1) < 1)
    throw UndefinedMeanError(
        "weights undefined: target subpopulation " + std::to_string(target) +
        " has no treated samples");

  const int na = static_cast<int>(active_.size());
  const int m = static_cast<int>(gram_.rows());
  const int dx = static_cast<int>(state_->features().rows());
  const int pre_rows = m - 1 - dx;
  const double sig2 = cfg_.sigma * cfg_.sigma;
  const double v_ind = indicator_objective(target);

  // Stationarity of 0.5 beta'Q beta - 0.5 c'beta under A beta = b gives the
  // Schur system (A Q^-1 A') nu = A Q^-1 c - 2 b, beta = Q^-1 (c - A'nu)/2,
  // with c = (2 lambda / n_target) e_target.
  const double c_t = 2.0 * cfg_.lambda / counts_.total(target);

  Eigen::VectorXd& b = resid_;  // reused as the rhs vector first
  b.head(dx) = state_->features().col(target);
  b.segment(dx, pre_rows) = state_->pre_means_raw().col(target);
  b[m - 1] = 1.0;

  rhs_ = (c_t / qdiag_[pos]) * constraints_.col(pos) - 2.0 * b;
  multipliers_ = gram_cod_.solve(rhs_);

  beta.resize(na);
  beta.noalias() = -constraints_.transpose() * multipliers_;
  beta[pos] += c_t;
  beta = 0.5 * beta.cwiseQuotient(qdiag_);

  const double sum_err = std::abs(beta.sum() - 1.0);
  double match_err2 = 0.0;
  if (m > 1) {
    multipliers_.head(m - 1).noalias() = constraints_.topRows(m - 1) * beta;
    match_err2 = (multipliers_.head(m - 1) - b.head(m - 1)).squaredNorm();
  }
  const bool feasible = sum_err <= kSumTol &&
                        match_err2 <= kResidualTol * kResidualTol;

  double obj = sig2 / counts_(target, 1);
  if (feasible) {
    double g = 0.0;
    for (int k = 0; k < na; ++k) {
      const int j = active_[k];
      const double d = beta[k] - (j == target ? 1.0 : 0.0);
      g += beta[k] * beta[k] / counts_(j, 0) +
           cfg_.lambda * d * d / counts_.total(j);
    }
    obj += sig2 * g;
  }

  // A feasible point that cannot beat the indicator beyond roundoff means
  // the indicator is itself the constrained optimum (e.g. the constraints
  // fully determine beta); returning it is healthy. Only an infeasible KKT
  // point or a genuinely worse objective flags a fallback.
  if (!feasible || !(obj <= v_ind + kTieTol * std::max(1.0, v_ind))) {
    beta.setZero();
    beta[pos] = 1.0;
    return {v_ind, true};
  }
  if (!(obj < v_ind) ||
      (beta - Eigen::VectorXd::Unit(na, pos)).lpNorm<Eigen::Infinity>() <=
          kSnapTol) {
    beta.setZero();
    beta[pos] = 1.0;
    return {v_ind, false};
  }
  return {obj, false};
}

Weights BetaSolver::solve(int target) const {
  Eigen::VectorXd beta_active;
  const SolveOut out = solve_into(target, beta_active);
  Weights w;
  w.beta = Eigen::VectorXd::Zero(state_->subpops());
  for (int k = 0; k < static_cast<int>(active_.size()); ++k)
    w.beta[active_[k]] = beta_active[k];
  w.target = target;
  w.objective_value = out.objective;
  w.fallback = out.fallback;
  return w;
}

double BetaSolver::objective_value(int target) const {
  return solve_into(target, beta_buf_).objective;
}

Weights solve_beta(const TrialState& state, int target,
                   const EstimatorConfig& cfg, const Counts* n_override) {
  BetaSolver solver(state, cfg);
  if (n_override) solver.set_counts(*n_override);
  return solver.solve(target);
}

double sensitivity_index(const TrialState& state, int subpop,
                         const EstimatorConfig& cfg) {
  const Weights w = solve_beta(state, subpop, cfg);
  const double est = synthetic_estimate(state, w);
  return std::abs(est) / std::sqrt(w.objective_value);
}

LambdaOracle lambda_oracle(const Eigen::MatrixXd& factors) {
  const int dz = static_cast<int>(factors.rows());
  const int periods = static_cast<int>(factors.cols());
  if (dz < 1 || periods < 2)
    throw ValidationError("factor matrix must have >= 1 row and >= 2 columns");
  const Eigen::MatrixXd pre = factors.leftCols(periods - 1);
  const Eigen::VectorXd target = factors.col(periods - 1);

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(pre);
  if (cod.rank() < dz)
    throw RankDeficientError(
        "pre-treatment factor block is rank-deficient; the regularizer "
        "weight cannot be recovered, fall back to a configured value");
  const Eigen::VectorXd x = cod.solve(target);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(pre);
  const double smin = svd.singularValues().minCoeff();
  const double ratio = target.norm() / smin;
  return {x.squaredNorm(), ratio * ratio};
}

LambdaOracle lambda_oracle(const Environment& env) {
  return lambda_oracle(env.factors);
}

}  // namespace syntax
