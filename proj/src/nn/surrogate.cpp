#include "archevo/nn/surrogate.hpp"

#include <algorithm>
#include <cmath>

namespace archevo::nn {

double surrogate_val_error(const Chromosome& chromosome) {
  const auto n_conv = std::count_if(chromosome.layers.begin(), chromosome.layers.end(),
                                    [](const Layer& l) { return is_conv(l); });
  const double arch = 0.40 * std::pow(0.7, static_cast<double>(n_conv));
  const double lr = 0.10 * std::abs(std::log10(chromosome.learning_rate / kSurrogateOptimalLearningRate));
  return std::min(1.0, 0.05 + arch + lr);
}

EvaluatorOutcome surrogate_evaluate(const Chromosome& chromosome, const TaskModality& modality,
                                    int num_classes) {
  EvaluatorOutcome out;
  out.n_params = count_parameters(chromosome, modality, num_classes, LayerBounds::unbounded());
  out.val_error = surrogate_val_error(chromosome);
  return out;
}

EvaluatorOutcome SurrogateEvaluator::train_and_validate(const Chromosome& chromosome,
                                                        const Dataset& dataset, int,
                                                        std::uint64_t) const {
  return surrogate_evaluate(chromosome, dataset.modality, dataset.num_classes);
}

}  // namespace archevo::nn
