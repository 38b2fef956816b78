#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "archevo/genome.hpp"
#include "archevo/rng.hpp"
#include "archevo/tensor.hpp"

namespace archevo::nn {

struct TrainingHyper {
  int batch_size = 1024;
  double weight_init_mean = 0.0;
  double weight_init_std = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double prob_clamp = 1e-7;

  /// Throws std::invalid_argument on out-of-range values.
  void check() const;
};

inline constexpr double kLeakyReluSlope = 0.01;
inline constexpr double kPreluInitialSlope = 0.25;

/// inference: dropout is the identity. training: fresh dropout masks are
/// drawn. training_fixed_mask: masks from the previous training pass are
/// reused (used for finite-difference checks).
enum class Mode { inference, training, training_fixed_mask };

template <typename T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  Matrix<T> adam_m;
  Matrix<T> adam_v;
};

template <typename T>
using Gradients = std::vector<Matrix<T>>;

template <typename T>
struct LossAndGradients {
  double loss = 0.0;
  Gradients<T> gradients;  // aligned with Network::parameter(i)
};

template <typename T>
class LayerOp;

/// An instantiated chromosome: weights, activations and Adam accumulators.
/// Single-threaded; owned by one training session.
template <typename T>
class Network {
 public:
  /// Weights ~ N(mean, std), biases 0, PReLU slopes 0.25, Adam state 0.
  /// Throws InvalidChromosome if the chromosome does not validate.
  Network(const Chromosome& chromosome, const TaskModality& modality, int num_classes,
          const TrainingHyper& hyper, Rng& rng);
  ~Network();
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;

  std::size_t num_parameter_arrays() const noexcept { return params_.size(); }
  Parameter<T>& parameter(std::size_t i) { return *params_[i]; }
  const Parameter<T>& parameter(std::size_t i) const { return *params_[i]; }
  /// Total number of instantiated trainable scalars.
  std::int64_t parameter_count() const noexcept;

  /// Output of the terminal layer (probabilities, or raw scores for a linear
  /// terminal). Throws ShapeError if the batch width does not match.
  Matrix<T> forward(const Matrix<T>& batch, Mode mode, Rng* rng = nullptr);

  /// Mean categorical cross entropy over the batch, without gradients.
  double loss(const Matrix<T>& batch, const Matrix<T>& one_hot, Mode mode, Rng* rng = nullptr);

  /// Forward + backward. Throws NonFiniteLoss if the loss is NaN or infinite.
  LossAndGradients<T> loss_and_gradients(const Matrix<T>& batch, const Matrix<T>& one_hot,
                                         Mode mode = Mode::training, Rng* rng = nullptr);

  /// Bias-corrected Adam update; `step` counts from 1.
  void adam_step(const Gradients<T>& gradients, double learning_rate, std::int64_t step);

  Activation terminal_activation() const noexcept { return terminal_; }
  int num_classes() const noexcept { return num_classes_; }
  const TrainingHyper& hyper() const noexcept { return hyper_; }

 private:
  std::vector<std::unique_ptr<LayerOp<T>>> ops_;
  std::vector<Parameter<T>*> params_;
  std::vector<Matrix<T>> activations_;
  std::int64_t input_width_ = 0;
  int num_classes_ = 0;
  Activation terminal_ = Activation::linear;
  TrainingHyper hyper_;
};

extern template class Network<float>;
extern template class Network<double>;

/// Mean categorical cross entropy of terminal outputs against one-hot labels.
/// Linear terminals use a fused softmax cross entropy on the scores; softmax
/// terminals use probabilities clamped to [clamp, 1 - clamp]; sigmoid
/// terminals are first normalised to sum to one per row, then clamped. When
/// `d_output` is given it receives dLoss/dOutput.
template <typename T>
double categorical_cross_entropy(const Matrix<T>& output, const Matrix<T>& one_hot,
                                 Activation terminal, double clamp, Matrix<T>* d_output);

template <typename T>
void activate(Activation act, const Matrix<T>& z, Matrix<T>& a, const T* prelu_slope,
              int channels);

template <typename T>
Network<T> build_network(const Chromosome& chromosome, const TaskModality& modality,
                         int num_classes, const TrainingHyper& hyper, Rng& rng) {
  return Network<T>(chromosome, modality, num_classes, hyper, rng);
}

}  // namespace archevo::nn
