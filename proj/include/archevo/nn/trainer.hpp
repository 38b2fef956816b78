#pragma once

#include <cstdint>
#include <vector>

#include "archevo/data.hpp"
#include "archevo/fitness.hpp"
#include "archevo/nn/network.hpp"

namespace archevo::nn {

struct TrainedNetwork {
  Network<float> network;
  std::vector<double> loss_trace;  // mean training loss per epoch
};

/// Adam on minibatches of hyper.batch_size, reshuffling the training
/// partition each epoch. Throws NonFiniteLoss on divergence.
TrainedNetwork train(const Chromosome& chromosome, const Dataset& dataset, int epochs,
                     const TrainingHyper& hyper, Rng& rng);

/// Argmax misclassification rate in inference mode. Throws NonFiniteLoss if
/// the network emits NaN or infinite outputs.
double error_rate(Network<float>& network, const Partition& partition, int batch_size);

EvaluatorOutcome train_and_validate(const Chromosome& chromosome, const Dataset& dataset,
                                    int epochs, const TrainingHyper& hyper, Rng& rng);

/// Evaluator backed by the micro trainer above.
class MicroNNEvaluator final : public Evaluator {
 public:
  explicit MicroNNEvaluator(TrainingHyper hyper = {}) : hyper_(hyper) { hyper_.check(); }

  EvaluatorOutcome train_and_validate(const Chromosome& chromosome, const Dataset& dataset,
                                      int epochs, std::uint64_t seed) const override;

  const TrainingHyper& hyper() const noexcept { return hyper_; }

 private:
  TrainingHyper hyper_;
};

}  // namespace archevo::nn
