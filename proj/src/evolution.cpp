#include "archevo/evolution.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

namespace archevo {

namespace {

void require(bool ok, const char* key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

const FitnessRecord& cached(const Chromosome& c) {
  if (!c.fitness) throw std::logic_error("chromosome has no cached fitness: " + describe(c));
  return *c.fitness;
}

/// Runs f(0..n-1), optionally on several threads. Exceptions are rethrown in
/// slot order after all slots finish.
template <class F>
void for_each_slot(int n, int workers, F&& f) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i; (i = next.fetch_add(1)) < n;) {
      try {
        f(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < std::min(workers, n); ++w) pool.emplace_back(work);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

bool coin(Rng& rng) { return std::bernoulli_distribution(0.5)(rng); }

int uniform(int lo, int hi, Rng& rng) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

/// A fresh gene for position `pos`, given the layers in front of it.
Layer fresh_layer(const std::vector<Layer>& layers, int pos, const TaskModality& modality,
                  const LayerBounds& bounds, Rng& rng) {
  if (pos == 0 && modality.is_sequence())
    return Embedding{uniform(bounds.embedding_dim.min, bounds.embedding_dim.max, rng)};
  const bool after_dense = std::any_of(layers.begin(), layers.begin() + pos,
                                       [](const Layer& l) { return is_dense(l); });
  return random_layer(after_dense ? LayerContext::non_cnn : LayerContext::cnn, pos != 0, bounds,
                      rng);
}

enum class Edit { add, remove, replace };

void update_best(Chromosome& best, std::span<const Chromosome> population) {
  for (const auto& c : population)
    if (!best.fitness || fitter(cached(c), *best.fitness)) best = c;
}

}  // namespace

void EvolutionConfig::check() const {
  require(population_size >= 1, "population_size", "must be >= 1");
  require(generation_max >= 0, "generation_max", "must be >= 0");
  require(epochs_start >= 1, "epochs_start", "must be >= 1");
  require(tournament_size >= 1, "tournament_size", "must be >= 1");
  require(population_decrement >= 0, "population_decrement", "must be >= 0");
  require(population_floor >= tournament_size, "population_floor",
          "must be >= tournament_size (" + std::to_string(tournament_size) + ")");
  require(population_size >= population_floor, "population_size",
          "must be >= population_floor (" + std::to_string(population_floor) + ")");
  require(max_size >= 1, "max_size", "must be >= 1");
  require(std::isfinite(alpha) && alpha >= 0, "alpha", "must be finite and >= 0");
  require(workers >= 1, "workers", "must be >= 1");
  try {
    search_bounds().check();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("bounds", e.what());
  }
}

LayerBounds EvolutionConfig::search_bounds() const {
  LayerBounds b = bounds;
  b.max_size = max_size;
  return b;
}

int scheduled_epochs(const EvolutionConfig& config, int generation) {
  return config.epochs_start + generation;
}

int scheduled_population(const EvolutionConfig& config, int generation) {
  const std::int64_t size = static_cast<std::int64_t>(config.population_size) -
                            static_cast<std::int64_t>(generation) * config.population_decrement;
  return static_cast<int>(std::max<std::int64_t>(config.population_floor, size));
}

int initial_interior_size(int index, int max_size) { return std::min(index / 10 + 1, max_size); }

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty set");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("percentile: q must lie in [0,1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

GenerationStats summarize_generation(std::span<const Chromosome> population) {
  if (population.empty()) throw std::invalid_argument("summarize_generation: empty population");
  std::vector<double> scores, rates;
  const Chromosome* best = nullptr;
  for (const auto& c : population) {
    const auto& f = cached(c);
    scores.push_back(f.score);
    rates.push_back(c.learning_rate);
    if (!best || fitter(f, *best->fitness)) best = &c;
  }
  const auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  GenerationStats s;
  s.population_size = static_cast<int>(population.size());
  s.fitness_mean = mean(scores);
  s.fitness_p5 = percentile(scores, 0.05);
  s.fitness_p95 = percentile(scores, 0.95);
  s.fitness_best = best->fitness->score;
  s.lr_mean = mean(rates);
  s.lr_p5 = percentile(rates, 0.05);
  s.lr_p95 = percentile(rates, 0.95);
  s.best_val_accuracy = 1.0 - best->fitness->val_error;
  s.best_n_params = best->fitness->n_params;
  return s;
}

FitnessRecord evaluate_or_penalize(Chromosome& chromosome, const Dataset& dataset, int epochs,
                                   double alpha, const Evaluator& evaluator, std::uint64_t seed) {
  try {
    return evaluate(chromosome, dataset, epochs, alpha, evaluator, seed);
  } catch (const NonFiniteLoss&) {
    FitnessRecord r;
    r.val_error = 1.0;
    r.n_params = count_parameters(chromosome, dataset.modality, dataset.num_classes,
                                  LayerBounds::unbounded());
    r.alpha = alpha;
    r.epochs_used = epochs;
    r.score = diverged_score(alpha);
    r.diverged = true;
    chromosome.fitness = r;
    return r;
  } catch (const std::exception& e) {
    throw EvaluationError(chromosome, e.what());
  }
}

std::vector<Chromosome> init_population(const EvolutionConfig& config, const Dataset& dataset,
                                        const Evaluator& evaluator) {
  config.check();
  const LayerBounds bounds = config.search_bounds();
  std::vector<Chromosome> population(static_cast<std::size_t>(config.population_size));
  for_each_slot(config.population_size, config.workers, [&](int i) {
    Rng rng(derive_seed(config.seed, {0, static_cast<std::uint64_t>(i)}));
    Chromosome c = random_chromosome(initial_interior_size(i, config.max_size), dataset.modality,
                                     dataset.num_classes, bounds, rng);
    evaluate_or_penalize(c, dataset, config.epochs_start, config.alpha, evaluator, rng());
    population[static_cast<std::size_t>(i)] = std::move(c);
  });
  return population;
}

const Chromosome& tournament_select(std::span<const Chromosome> population, int tournament_size,
                                    Rng& rng) {
  if (population.empty()) throw std::invalid_argument("tournament_select: empty population");
  if (tournament_size < 1) throw std::invalid_argument("tournament_select: tournament_size < 1");
  std::uniform_int_distribution<std::size_t> pick(0, population.size() - 1);
  const Chromosome* winner = nullptr;
  for (int k = 0; k < tournament_size; ++k) {
    const Chromosome& c = population[pick(rng)];
    const auto& f = cached(c);
    if (!winner || fitter(f, *winner->fitness)) winner = &c;
  }
  return *winner;
}

Chromosome mutate(const Chromosome& parent, const EvolutionConfig& config,
                  const TaskModality& modality, int num_classes, Rng& rng) {
  const LayerBounds bounds = config.search_bounds();
  if (const auto report = validate(parent, modality, num_classes, bounds); !report)
    throw InvalidChromosome("mutate: parent is invalid: " + report.violations.front());

  const int n = parent.interior_size();
  for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
    Chromosome child{parent.learning_rate, parent.layers, std::nullopt};
    if (coin(rng)) {
      child.learning_rate = random_learning_rate(bounds, rng);
      if (child.learning_rate == parent.learning_rate) continue;
    } else {
      std::vector<Edit> edits;
      if (n < bounds.max_size) edits.push_back(Edit::add);
      if (n > 1) edits.push_back(Edit::remove);
      edits.push_back(Edit::replace);
      const Edit edit = edits[static_cast<std::size_t>(uniform(0, static_cast<int>(edits.size()) - 1, rng))];
      auto& layers = child.layers;
      switch (edit) {
        case Edit::add: {
          const int pos = uniform(1, n, rng);
          Layer layer = fresh_layer(layers, pos, modality, bounds, rng);
          layers.insert(layers.begin() + pos, std::move(layer));
          break;
        }
        case Edit::remove:
          layers.erase(layers.begin() + uniform(1, n - 1, rng));
          break;
        case Edit::replace: {
          const int pos = uniform(0, n - 1, rng);
          Layer layer = fresh_layer(layers, pos, modality, bounds, rng);
          if (layer == layers[static_cast<std::size_t>(pos)]) continue;
          layers[static_cast<std::size_t>(pos)] = std::move(layer);
          break;
        }
      }
    }
    if (validate(child, modality, num_classes, bounds)) return child;
  }
  throw RetryExhausted("mutate: no valid mutation of " + describe(parent) + " after " +
                       std::to_string(kMaxGenerationAttempts) + " attempts");
}

Chromosome produce_offspring(const Chromosome& parent, const EvolutionConfig& config,
                             const Dataset& dataset, const Evaluator& evaluator, int epochs,
                             Rng& rng) {
  const auto& parent_fitness = cached(parent);
  Chromosome offspring1 = mutate(parent, config, dataset.modality, dataset.num_classes, rng);
  Chromosome offspring2 = mutate(offspring1, config, dataset.modality, dataset.num_classes, rng);
  const std::uint64_t seed1 = rng();
  const std::uint64_t seed2 = rng();
  const auto f1 = evaluate_or_penalize(offspring1, dataset, epochs, config.alpha, evaluator, seed1);
  const auto f2 = evaluate_or_penalize(offspring2, dataset, epochs, config.alpha, evaluator, seed2);

  if (fitter(f2, f1) && fitter(f2, parent_fitness)) return offspring2;
  if (fitter(f1, parent_fitness)) return offspring1;
  return parent;
}

EvolutionState start_evolution(const EvolutionConfig& config, const Dataset& dataset,
                               const Evaluator& evaluator) {
  config.check();
  if (dataset.train.size() == 0 || dataset.validation.size() == 0)
    throw DataError("evolution needs non-empty train and validation partitions");
  EvolutionState state;
  state.generation = 0;
  state.epochs = scheduled_epochs(config, 0);
  state.population = init_population(config, dataset, evaluator);
  update_best(state.best, state.population);
  GenerationStats stats = summarize_generation(state.population);
  stats.generation = 0;
  stats.epochs = state.epochs;
  state.history.push_back(stats);
  return state;
}

void step_generation(EvolutionState& state, const EvolutionConfig& config, const Dataset& dataset,
                     const Evaluator& evaluator) {
  const int g = state.generation + 1;
  const int epochs = scheduled_epochs(config, g);
  const int target = scheduled_population(config, g);
  std::vector<Chromosome> next(static_cast<std::size_t>(target));
  const std::span<const Chromosome> current(state.population);
  for_each_slot(target, config.workers, [&](int slot) {
    Rng rng(derive_seed(config.seed, {static_cast<std::uint64_t>(g),
                                      static_cast<std::uint64_t>(slot)}));
    const Chromosome& parent = tournament_select(current, config.tournament_size, rng);
    next[static_cast<std::size_t>(slot)] =
        produce_offspring(parent, config, dataset, evaluator, epochs, rng);
  });
  state.population = std::move(next);
  state.generation = g;
  state.epochs = epochs;
  update_best(state.best, state.population);
  GenerationStats stats = summarize_generation(state.population);
  stats.generation = g;
  stats.epochs = epochs;
  state.history.push_back(stats);
}

EvolutionResult run_evolution(const EvolutionConfig& config, const Dataset& dataset,
                              const Evaluator& evaluator, const Observer& observer) {
  EvolutionState state = start_evolution(config, dataset, evaluator);
  if (observer) observer(0, state.history.back(), state.best);
  while (state.generation < config.generation_max) {
    step_generation(state, config, dataset, evaluator);
    if (observer) observer(state.generation, state.history.back(), state.best);
  }
  return {std::move(state.best), std::move(state.history), std::move(state.population)};
}

}  // namespace archevo
