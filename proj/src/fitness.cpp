#include "archevo/fitness.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "archevo/errors.hpp"

namespace archevo {

double fitness_score(double val_error, std::int64_t n_params, double alpha) {
  if (n_params < 1) throw std::domain_error("fitness_score: n_params must be >= 1");
  if (!(val_error >= 0.0 && val_error <= 1.0))
    throw std::domain_error("fitness_score: val_error must lie in [0,1]");
  return val_error + alpha * (1.0 - 1.0 / static_cast<double>(n_params));
}

FitnessRecord evaluate(Chromosome& chromosome, const Dataset& dataset, int epochs, double alpha,
                       const Evaluator& evaluator, std::uint64_t seed) {
  if (epochs < 1) throw std::invalid_argument("evaluate: epochs must be >= 1");
  if (chromosome.fitness && chromosome.fitness->epochs_used == epochs &&
      chromosome.fitness->alpha == alpha)
    return *chromosome.fitness;

  const EvaluatorOutcome outcome = evaluator.train_and_validate(chromosome, dataset, epochs, seed);
  for (double loss : outcome.train_loss_trace)
    if (!std::isfinite(loss)) throw NonFiniteLoss("evaluator reported a non-finite training loss");

  FitnessRecord record;
  record.val_error = outcome.val_error;
  record.n_params = outcome.n_params;
  record.alpha = alpha;
  record.epochs_used = epochs;
  record.score = fitness_score(outcome.val_error, outcome.n_params, alpha);
  chromosome.fitness = record;
  return record;
}

}  // namespace archevo
