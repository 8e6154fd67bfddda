#pragma once

#include <stdexcept>
#include <string>

namespace syntax {

// Configuration or argument rejected before any work is done. The message
// names the violated condition.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A sample mean was requested for a (subpopulation, group) cell that has
// received no observations yet.
struct UndefinedMeanError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The pre-treatment factor matrix does not span the final-period factor, so
// the data-generating regularizer weight cannot be recovered.
struct RankDeficientError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace syntax
