#pragma once

#include <cstdint>

namespace archevo {

/// Cached outcome of evaluating a chromosome.
///
/// For a normal evaluation `score == val_error + alpha * (1 - 1 / n_params)`.
/// A chromosome whose training diverged carries `diverged == true`,
/// `val_error == 1` and the worst-case score `2 * alpha + 1`.
struct FitnessRecord {
  double val_error = 1.0;
  std::int64_t n_params = 1;
  double score = 0.0;
  double alpha = 1.0;
  int epochs_used = 0;
  bool diverged = false;

  bool operator==(const FitnessRecord&) const = default;
};

}  // namespace archevo
