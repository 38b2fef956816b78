#pragma once

#include <cstdint>

#include "archevo/fitness.hpp"

namespace archevo::nn {

/// Learning rate at which the surrogate error is lowest.
inline constexpr double kSurrogateOptimalLearningRate = 3e-3;

/// Training-free stand-in for a validation error:
///
///   val_error = min(1, 0.05 + 0.40 * 0.7^n_conv + 0.10 * |log10(lr / 0.003)|)
///
/// where n_conv counts Conv1D/Conv2D layers. Deterministic and
/// platform-independent.
double surrogate_val_error(const Chromosome& chromosome);

/// Throws InvalidChromosome if the chromosome is not valid for the task.
EvaluatorOutcome surrogate_evaluate(const Chromosome& chromosome, const TaskModality& modality,
                                    int num_classes);

class SurrogateEvaluator final : public Evaluator {
 public:
  EvaluatorOutcome train_and_validate(const Chromosome& chromosome, const Dataset& dataset,
                                      int epochs, std::uint64_t seed) const override;
};

}  // namespace archevo::nn
