// Recruitment policies. Each maps the current trial state to the next
// (subpopulation, arm) assignment, and to a final selection rule. All
// argmins break ties toward the lowest index: candidates are scanned in
// lexicographic order and the incumbent is replaced only on a strict
// improvement beyond kArgminTol.
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "syntax/estimator.hpp"
#include "syntax/rng.hpp"
#include "syntax/trial_state.hpp"

namespace syntax {

enum class PolicyType {
  Syntax,               // sensitivity-targeted synthetic design
  ConventionalStudy,    // uniform assignment, naive estimates
  ThresholdingBandits,  // lowest naive signal-to-allocation index
  SyntheticStudy,       // uniform assignment, synthetic estimates
  SyntheticDesign,      // levels the worst variance bound, synthetic estimates
};

const char* to_string(PolicyType p);
PolicyType policy_from_string(const std::string& s);
bool requires_lambda(PolicyType p);

struct PolicyKind {
  PolicyType type = PolicyType::Syntax;
  std::optional<double> lambda;  // required iff requires_lambda(type)
  double sigma = 1.0;
};

// Validates the (type, lambda, sigma) combination.
PolicyKind make_policy(PolicyType type, std::optional<double> lambda,
                       double sigma);

struct PolicyDecision {
  int subpop = 0;
  int group = 0;
  bool operator==(const PolicyDecision&) const = default;
};

// Every trial opens with one deterministic pass over all (subpop, arm)
// cells so all means are defined: episode e < 2K recruits (e / 2, e % 2).
int warm_start_length(int subpops);
PolicyDecision warm_start_decision(int subpops, int episode);

// Post-warm-start decision. `episode` is the 0-based global episode index.
// The stream is consumed only by the uniform policies, and identically by
// both, so conventional and synthetic-study trials share their data.
PolicyDecision decide(const PolicyKind& kind, const TrialState& state,
                      int episode, RngStream& rng);

struct SelectionResult {
  std::vector<int> selected;   // estimate strictly positive, ascending
  Eigen::VectorXd estimates;   // one per subpopulation
  bool synthetic = false;      // which estimator produced the estimates
};

SelectionResult finalize(const PolicyKind& kind, const TrialState& state);

inline constexpr double kArgminTol = 1e-12;

}  // namespace syntax
