#pragma once

#include <cstdint>
#include <exception>
#include <functional>
#include <span>
#include <vector>

#include "archevo/data.hpp"
#include "archevo/errors.hpp"
#include "archevo/fitness.hpp"
#include "archevo/genome.hpp"
#include "archevo/rng.hpp"

namespace archevo {

struct EvolutionConfig {
  int population_size = 100;
  int generation_max = 10;
  int epochs_start = 3;
  int tournament_size = 7;
  int population_decrement = 10;
  int population_floor = 10;
  int max_size = 7;
  double alpha = 1.0;
  std::uint64_t seed = 0;
  LayerBounds bounds;
  /// Threads used for offspring production and initial evaluation. Results
  /// do not depend on this value.
  int workers = 1;

  /// Throws ConfigError naming the offending field.
  void check() const;

  /// `bounds` with max_size taken from this config.
  LayerBounds search_bounds() const;

  bool operator==(const EvolutionConfig&) const = default;
};

/// Epoch budget used in generation g: epochs_start + g.
int scheduled_epochs(const EvolutionConfig& config, int generation);

/// Population size of generation g: max(floor, size - g * decrement).
int scheduled_population(const EvolutionConfig& config, int generation);

/// Interior size of the i-th initial chromosome: min(floor(i / 10) + 1, max_size).
int initial_interior_size(int index, int max_size);

struct GenerationStats {
  int generation = 0;
  int epochs = 0;
  int population_size = 0;
  double fitness_mean = 0;
  double fitness_p5 = 0;
  double fitness_p95 = 0;
  double fitness_best = 0;
  double lr_mean = 0;
  double lr_p5 = 0;
  double lr_p95 = 0;
  double best_val_accuracy = 0;
  std::int64_t best_n_params = 0;
  bool operator==(const GenerationStats&) const = default;
};

/// Linear-interpolation percentile (q in [0,1]) of unsorted values.
double percentile(std::vector<double> values, double q);

/// Throws std::invalid_argument on an empty population and std::logic_error
/// when a member has no cached fitness.
GenerationStats summarize_generation(std::span<const Chromosome> population);

/// Evaluation failed for a reason other than divergence. Carries the
/// chromosome that was being evaluated.
class EvaluationError : public Error {
 public:
  EvaluationError(Chromosome chromosome, const std::string& what)
      : Error("evaluation failed for " + describe(chromosome) + ": " + what),
        chromosome_(std::move(chromosome)) {}

  const Chromosome& chromosome() const noexcept { return chromosome_; }

 private:
  Chromosome chromosome_;
};

/// evaluate(), except that a NonFiniteLoss yields a cached record with
/// val_error 1 and score diverged_score(alpha) marked `diverged`. Other
/// failures are rethrown as EvaluationError.
FitnessRecord evaluate_or_penalize(Chromosome& chromosome, const Dataset& dataset, int epochs,
                                   double alpha, const Evaluator& evaluator, std::uint64_t seed);

/// Creates and evaluates the generation-0 population at epochs_start.
/// Member i draws from derive_seed(config.seed, {0, i}).
std::vector<Chromosome> init_population(const EvolutionConfig& config, const Dataset& dataset,
                                        const Evaluator& evaluator);

/// Best of `tournament_size` members drawn with replacement. Ties go to fewer
/// parameters, then to the earlier draw. Throws std::logic_error on a member
/// without cached fitness.
const Chromosome& tournament_select(std::span<const Chromosome> population, int tournament_size,
                                    Rng& rng);

/// One edit: a new learning rate (probability 1/2) or one add/delete/replace
/// of an interior layer. The first layer is never deleted and insertion never
/// happens before it; the terminal layer is never touched. Redrawn until the
/// child validates; throws RetryExhausted after kMaxGenerationAttempts.
Chromosome mutate(const Chromosome& parent, const EvolutionConfig& config,
                  const TaskModality& modality, int num_classes, Rng& rng);

/// offspring1 = mutate(parent), offspring2 = mutate(offspring1), both
/// evaluated at `epochs`; returns the fittest of parent, offspring1,
/// offspring2 (ties: fewer parameters, then that order).
Chromosome produce_offspring(const Chromosome& parent, const EvolutionConfig& config,
                             const Dataset& dataset, const Evaluator& evaluator, int epochs,
                             Rng& rng);

struct EvolutionState {
  int generation = 0;
  int epochs = 0;
  std::vector<Chromosome> population;
  std::vector<GenerationStats> history;
  Chromosome best;  // all-time best
};

/// Generation 0: initial population, its statistics and best member.
EvolutionState start_evolution(const EvolutionConfig& config, const Dataset& dataset,
                               const Evaluator& evaluator);

/// Advances to the next generation: bumps epochs, shrinks the population per
/// schedule and fills it with select -> produce_offspring, one per slot.
/// Slot s draws from derive_seed(config.seed, {generation, s}).
void step_generation(EvolutionState& state, const EvolutionConfig& config, const Dataset& dataset,
                     const Evaluator& evaluator);

using Observer =
    std::function<void(int generation, const GenerationStats& stats, const Chromosome& best)>;

struct EvolutionResult {
  Chromosome best;
  std::vector<GenerationStats> history;
  std::vector<Chromosome> population;  // final generation
};

/// Generations 0..generation_max; the observer is called after each one.
EvolutionResult run_evolution(const EvolutionConfig& config, const Dataset& dataset,
                              const Evaluator& evaluator, const Observer& observer = {});

}  // namespace archevo
