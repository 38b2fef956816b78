#pragma once

#include <cstdint>
#include <vector>

#include "archevo/data.hpp"
#include "archevo/fitness_record.hpp"
#include "archevo/genome.hpp"

namespace archevo {

/// val_error + alpha * (1 - 1 / n_params). Lower is better.
/// Throws std::domain_error for n_params < 1 or val_error outside [0,1].
double fitness_score(double val_error, std::int64_t n_params, double alpha);

/// Worst-case score given to a chromosome whose training diverged.
inline double diverged_score(double alpha) noexcept { return 2.0 * alpha + 1.0; }

struct EvaluatorOutcome {
  double val_error = 1.0;
  std::int64_t n_params = 0;
  std::vector<double> train_loss_trace;
};

/// Backend that turns a chromosome into a validation error. Implementations
/// must be safe to call concurrently for distinct chromosomes.
class Evaluator {
 public:
  virtual ~Evaluator() = default;

  /// Throws NonFiniteLoss if training diverges.
  virtual EvaluatorOutcome train_and_validate(const Chromosome& chromosome,
                                              const Dataset& dataset, int epochs,
                                              std::uint64_t seed) const = 0;
};

/// Trains/validates through `evaluator`, composes the score and caches the
/// record on `chromosome`. Reuses the cache when it was computed with the
/// same epoch budget and alpha.
FitnessRecord evaluate(Chromosome& chromosome, const Dataset& dataset, int epochs, double alpha,
                       const Evaluator& evaluator, std::uint64_t seed);

/// Orders records: lower score, then fewer parameters.
inline bool fitter(const FitnessRecord& a, const FitnessRecord& b) noexcept {
  if (a.score != b.score) return a.score < b.score;
  return a.n_params < b.n_params;
}

}  // namespace archevo
