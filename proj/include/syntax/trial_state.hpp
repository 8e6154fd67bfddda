// Running allocation counts and incremental outcome means for one trial.
// Holds everything the estimators are allowed to see: observed features,
// counts, pre-treatment means pooled over arms, and per-arm final means.
#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <utility>

#include "syntax/errors.hpp"

namespace syntax {

class Counts {
 public:
  Counts() = default;
  explicit Counts(int subpops) : n_(Eigen::MatrixX2i::Zero(subpops, 2)) {}

  int operator()(int subpop, int group) const { return n_(subpop, group); }
  int total(int subpop) const { return n_(subpop, 0) + n_(subpop, 1); }
  int subpops() const { return static_cast<int>(n_.rows()); }
  void increment(int subpop, int group) { ++n_(subpop, group); }
  void decrement(int subpop, int group) { --n_(subpop, group); }

  bool operator==(const Counts& other) const {
    return (n_.array() == other.n_.array()).all();
  }

 private:
  Eigen::MatrixX2i n_;
};

class TrialState {
 public:
  TrialState(Eigen::MatrixXd features, int periods)
      : features_(std::move(features)),
        counts_(static_cast<int>(features_.cols())),
        final_means_(Eigen::MatrixXd::Zero(features_.cols(), 2)),
        pre_means_(Eigen::MatrixXd::Zero(periods - 1, features_.cols())) {
    if (features_.cols() < 1)
      throw ValidationError("trial state needs at least one subpopulation");
    if (periods < 1) throw ValidationError("periods must be >= 1");
  }

  // Folds one episode into the running means. Updates counts first, then
  // means, so the increment uses the post-update count. The mean updates
  // are incremental (mean += (value - mean) / count).
  void record(int subpop, int group, const Eigen::VectorXd& pre,
              double final_outcome) {
    if (subpop < 0 || subpop >= subpops())
      throw std::out_of_range("subpop out of range");
    if (group != 0 && group != 1)
      throw std::out_of_range("group must be 0 or 1");
    if (pre.size() != pre_means_.rows())
      throw ValidationError("pre-treatment episode length mismatch");
    counts_.increment(subpop, group);
    pre_means_.col(subpop) +=
        (pre - pre_means_.col(subpop)) / counts_.total(subpop);
    final_means_(subpop, group) +=
        (final_outcome - final_means_(subpop, group)) /
        counts_(subpop, group);
  }

  int subpops() const { return static_cast<int>(features_.cols()); }
  int periods() const { return static_cast<int>(pre_means_.rows()) + 1; }

  const Counts& counts() const { return counts_; }
  int count(int subpop, int group) const { return counts_(subpop, group); }
  int count_total(int subpop) const { return counts_.total(subpop); }

  // Checked accessors. Throw UndefinedMeanError on empty cells.
  double final_mean(int subpop, int group) const {
    if (counts_(subpop, group) < 1)
      throw UndefinedMeanError("final-period mean undefined: subpopulation " +
                               std::to_string(subpop) + ", group " +
                               std::to_string(group) + " has no samples");
    return final_means_(subpop, group);
  }
  Eigen::VectorXd pre_mean(int subpop) const {
    if (counts_.total(subpop) < 1)
      throw UndefinedMeanError("pre-treatment mean undefined: subpopulation " +
                               std::to_string(subpop) + " has no samples");
    return pre_means_.col(subpop);
  }

  // Raw storage: entries are meaningful only where the matching count is
  // positive. Callers filter by counts before reading.
  const Eigen::MatrixXd& final_means_raw() const { return final_means_; }
  const Eigen::MatrixXd& pre_means_raw() const { return pre_means_; }

  const Eigen::MatrixXd& features() const { return features_; }

 private:
  Eigen::MatrixXd features_;    // feature_dim x subpops
  Counts counts_;
  Eigen::MatrixXd final_means_; // subpops x 2, per arm
  Eigen::MatrixXd pre_means_;   // (periods-1) x subpops, pooled over arms
};

}  // namespace syntax
