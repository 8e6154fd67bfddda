#include "syntax/policies.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace syntax {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Sensitivity pass shared by the adaptive synthetic policies: index of the
// subpopulation whose effect sign is hardest to call right now.
int most_sensitive(const TrialState& state, const BetaSolver& solver) {
  int best_i = 0;
  double best = kInf;
  for (int i = 0; i < state.subpops(); ++i) {
    const Weights w = solver.solve(i);
    const double est = synthetic_estimate(state, w);
    const double s = std::abs(est) / std::sqrt(w.objective_value);
    if (s < best - kArgminTol) {
      best = s;
      best_i = i;
    }
  }
  return best_i;
}

// Recruit pass shared by the adaptive synthetic policies: score each
// candidate (subpop, arm) by the variance bound the focus target would
// attain after one phantom sample there. Leaves the solver at the last
// hypothetical counts.
PolicyDecision phantom_argmin(BetaSolver& solver, const TrialState& state,
                              int focus) {
  Counts hyp = state.counts();
  PolicyDecision best_d;
  double best = kInf;
  for (int i = 0; i < state.subpops(); ++i) {
    for (int a = 0; a < 2; ++a) {
      hyp.increment(i, a);
      solver.set_counts(hyp);
      const double v = solver.objective_value(focus);
      hyp.decrement(i, a);
      if (v < best - kArgminTol) {
        best = v;
        best_d = {i, a};
      }
    }
  }
  return best_d;
}

PolicyDecision syntax_decide(const PolicyKind& kind, const TrialState& state) {
  const EstimatorConfig cfg{*kind.lambda, kind.sigma};
  BetaSolver solver(state, cfg);
  const int focus = most_sensitive(state, solver);
  return phantom_argmin(solver, state, focus);
}

PolicyDecision thresholding_decide(const TrialState& state) {
  int best_i = 0;
  double best = kInf;
  for (int i = 0; i < state.subpops(); ++i) {
    const double spread =
        1.0 / state.count(i, 0) + 1.0 / state.count(i, 1);
    const double s = std::abs(naive_estimate(state, i)) / std::sqrt(spread);
    if (s < best - kArgminTol) {
      best = s;
      best_i = i;
    }
  }
  const int a = state.count(best_i, 1) < state.count(best_i, 0) ? 1 : 0;
  return {best_i, a};
}

// Levels the optimal variance bound across targets: focus on the target
// whose bound is currently worst, then recruit wherever a phantom sample
// shrinks it the most. The focus must be resolved before the increment;
// a joint one-step minimax stalls, because the bound's treated-arm term
// is private to each target, so shaving the max by sampling the worst
// target is capped by its gap to the runner-up and loses every episode
// to small shared-donor control gains, starving the treated arms.
PolicyDecision synthetic_design_decide(const PolicyKind& kind,
                                       const TrialState& state) {
  const EstimatorConfig cfg{*kind.lambda, kind.sigma};
  BetaSolver solver(state, cfg);
  int focus = 0;
  double worst = -kInf;
  for (int t = 0; t < state.subpops(); ++t) {
    const double v = solver.objective_value(t);
    if (v > worst + kArgminTol) {
      worst = v;
      focus = t;
    }
  }
  return phantom_argmin(solver, state, focus);
}

}  // namespace

const char* to_string(PolicyType p) {
  switch (p) {
    case PolicyType::Syntax: return "syntax";
    case PolicyType::ConventionalStudy: return "conventional";
    case PolicyType::ThresholdingBandits: return "thresholding";
    case PolicyType::SyntheticStudy: return "synthetic-study";
    case PolicyType::SyntheticDesign: return "synthetic-design";
  }
  throw std::out_of_range("unknown policy type");
}

PolicyType policy_from_string(const std::string& s) {
  if (s == "syntax") return PolicyType::Syntax;
  if (s == "conventional") return PolicyType::ConventionalStudy;
  if (s == "thresholding") return PolicyType::ThresholdingBandits;
  if (s == "synthetic-study") return PolicyType::SyntheticStudy;
  if (s == "synthetic-design") return PolicyType::SyntheticDesign;
  throw ValidationError("unknown policy '" + s +
                        "' (expected syntax, conventional, thresholding, "
                        "synthetic-study or synthetic-design)");
}

bool requires_lambda(PolicyType p) {
  return p == PolicyType::Syntax || p == PolicyType::SyntheticStudy ||
         p == PolicyType::SyntheticDesign;
}

PolicyKind make_policy(PolicyType type, std::optional<double> lambda,
                       double sigma) {
  if (requires_lambda(type) && !lambda)
    throw ValidationError(std::string("policy '") + to_string(type) +
                          "' requires a regularizer weight lambda");
  if (lambda && !(*lambda >= 0.0))
    throw ValidationError("lambda must be >= 0");
  if (!(sigma > 0.0)) throw ValidationError("sigma must be > 0");
  return {type, lambda, sigma};
}

int warm_start_length(int subpops) { return 2 * subpops; }

PolicyDecision warm_start_decision(int subpops, int episode) {
  if (episode < 0 || episode >= warm_start_length(subpops))
    throw std::out_of_range("warm-start episode out of range");
  return {episode / 2, episode % 2};
}

PolicyDecision decide(const PolicyKind& kind, const TrialState& state,
                      int episode, RngStream& rng) {
  (void)episode;
  switch (kind.type) {
    case PolicyType::ConventionalStudy:
    case PolicyType::SyntheticStudy: {
      // Both uniform kinds draw identically, so their traces coincide
      // stream-for-stream.
      const int i = rng.uniform_int(state.subpops());
      const int a = rng.uniform_int(2);
      return {i, a};
    }
    case PolicyType::ThresholdingBandits:
      return thresholding_decide(state);
    case PolicyType::Syntax:
      return syntax_decide(kind, state);
    case PolicyType::SyntheticDesign:
      return synthetic_design_decide(kind, state);
  }
  throw std::out_of_range("unknown policy type");
}

SelectionResult finalize(const PolicyKind& kind, const TrialState& state) {
  const int K = state.subpops();
  SelectionResult out;
  out.estimates.resize(K);
  out.synthetic = requires_lambda(kind.type);
  if (out.synthetic) {
    const EstimatorConfig cfg{*kind.lambda, kind.sigma};
    BetaSolver solver(state, cfg);
    for (int i = 0; i < K; ++i)
      out.estimates[i] = synthetic_estimate(state, solver.solve(i));
  } else {
    for (int i = 0; i < K; ++i) out.estimates[i] = naive_estimate(state, i);
  }
  for (int i = 0; i < K; ++i)
    if (out.estimates[i] > 0.0) out.selected.push_back(i);
  return out;
}

}  // namespace syntax
