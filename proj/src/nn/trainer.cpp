#include "archevo/nn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "archevo/errors.hpp"

namespace archevo::nn {

namespace {

void gather(const FeatureMatrix& src, std::span<const std::size_t> rows, FeatureMatrix& dst) {
  dst.resize(static_cast<Eigen::Index>(rows.size()), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    dst.row(static_cast<Eigen::Index>(i)) = src.row(static_cast<Eigen::Index>(rows[i]));
}

}  // namespace

TrainedNetwork train(const Chromosome& chromosome, const Dataset& dataset, int epochs,
                     const TrainingHyper& hyper, Rng& rng) {
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (dataset.train.size() == 0) throw std::invalid_argument("train: empty training partition");

  TrainedNetwork out{Network<float>(chromosome, dataset.modality, dataset.num_classes, hyper, rng),
                     {}};
  const std::size_t n = dataset.train.size();
  const auto batch = static_cast<std::size_t>(hyper.batch_size);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  FeatureMatrix x, y;
  std::int64_t step = 0;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double weighted_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t count = std::min(batch, n - start);
      const std::span<const std::size_t> rows(order.data() + start, count);
      gather(dataset.train.features, rows, x);
      gather(dataset.train.labels, rows, y);
      auto lg = out.network.loss_and_gradients(x, y, Mode::training, &rng);
      out.network.adam_step(lg.gradients, chromosome.learning_rate, ++step);
      weighted_loss += lg.loss * static_cast<double>(count);
    }
    out.loss_trace.push_back(weighted_loss / static_cast<double>(n));
  }
  return out;
}

double error_rate(Network<float>& network, const Partition& partition, int batch_size) {
  if (partition.size() == 0) throw std::invalid_argument("error_rate: empty partition");
  const auto labels = partition.class_indices();
  std::size_t wrong = 0;
  const auto n = static_cast<Eigen::Index>(partition.size());
  for (Eigen::Index start = 0; start < n; start += batch_size) {
    const Eigen::Index count = std::min<Eigen::Index>(batch_size, n - start);
    const FeatureMatrix out =
        network.forward(partition.features.middleRows(start, count), Mode::inference);
    if (!out.allFinite()) throw NonFiniteLoss("network produced non-finite outputs");
    for (Eigen::Index r = 0; r < count; ++r) {
      Eigen::Index predicted = 0;
      out.row(r).maxCoeff(&predicted);
      if (predicted != labels[static_cast<std::size_t>(start + r)]) ++wrong;
    }
  }
  return static_cast<double>(wrong) / static_cast<double>(partition.size());
}

EvaluatorOutcome train_and_validate(const Chromosome& chromosome, const Dataset& dataset,
                                    int epochs, const TrainingHyper& hyper, Rng& rng) {
  TrainedNetwork trained = train(chromosome, dataset, epochs, hyper, rng);
  EvaluatorOutcome outcome;
  outcome.val_error = error_rate(trained.network, dataset.validation, hyper.batch_size);
  outcome.n_params = count_parameters(chromosome, dataset.modality, dataset.num_classes,
                                      LayerBounds::unbounded());
  outcome.train_loss_trace = std::move(trained.loss_trace);
  return outcome;
}

EvaluatorOutcome MicroNNEvaluator::train_and_validate(const Chromosome& chromosome,
                                                      const Dataset& dataset, int epochs,
                                                      std::uint64_t seed) const {
  Rng rng(seed);
  return nn::train_and_validate(chromosome, dataset, epochs, hyper_, rng);
}

}  // namespace archevo::nn
