#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "archevo/fitness_record.hpp"
#include "archevo/rng.hpp"

namespace archevo {

// ---------------------------------------------------------------------------
// Task modality

struct Image2D {
  int height = 1;
  int width = 1;
  int channels = 1;
  bool operator==(const Image2D&) const = default;
};

/// Integer token sequences. `vocab_size` is the number of distinct token
/// indices, i.e. the number of rows of an embedding table (index 0 included).
struct Sequence {
  int max_length = 1;
  int vocab_size = 1;
  bool operator==(const Sequence&) const = default;
};

struct TaskModality {
  std::variant<Image2D, Sequence> kind;

  static TaskModality image2d(int height, int width, int channels);
  static TaskModality sequence(int max_length, int vocab_size);

  bool is_image() const noexcept { return std::holds_alternative<Image2D>(kind); }
  bool is_sequence() const noexcept { return std::holds_alternative<Sequence>(kind); }
  std::string describe() const;

  bool operator==(const TaskModality&) const = default;
};

// ---------------------------------------------------------------------------
// Layer genes

enum class Activation { linear, leaky_relu, prelu, relu, sigmoid, softmax };

std::string_view to_string(Activation a) noexcept;
std::optional<Activation> parse_activation(std::string_view name) noexcept;

inline constexpr Activation kConvActivations[] = {Activation::linear, Activation::leaky_relu,
                                                  Activation::prelu, Activation::relu};
inline constexpr Activation kDenseActivations[] = {Activation::linear, Activation::sigmoid,
                                                   Activation::softmax, Activation::relu};
inline constexpr Activation kTerminalActivations[] = {Activation::linear, Activation::sigmoid,
                                                      Activation::softmax};

bool is_conv_activation(Activation a) noexcept;
bool is_dense_activation(Activation a) noexcept;
bool is_terminal_activation(Activation a) noexcept;

struct Conv1D {
  int filters = 10;
  int kernel = 1;
  Activation activation = Activation::linear;
  bool operator==(const Conv1D&) const = default;
};

/// Square kernels only.
struct Conv2D {
  int filters = 10;
  int kernel = 1;
  Activation activation = Activation::linear;
  bool operator==(const Conv2D&) const = default;
};

struct MaxPool1D {
  int kernel = 1;
  bool operator==(const MaxPool1D&) const = default;
};

struct MaxPool2D {
  int kernel = 1;
  bool operator==(const MaxPool2D&) const = default;
};

struct Dense {
  int units = 10;
  Activation activation = Activation::linear;
  bool operator==(const Dense&) const = default;
};

struct Dropout {
  double keep_prob = 0.5;
  bool operator==(const Dropout&) const = default;
};

struct Embedding {
  int output_dim = 100;
  bool operator==(const Embedding&) const = default;
};

using Layer = std::variant<Conv1D, Conv2D, MaxPool1D, MaxPool2D, Dense, Dropout, Embedding>;

/// Lowercase type tag used in documents and logs ("conv2d", "dense", ...).
std::string_view layer_type_name(const Layer& layer) noexcept;
std::string describe(const Layer& layer);

inline bool is_conv(const Layer& l) noexcept {
  return std::holds_alternative<Conv1D>(l) || std::holds_alternative<Conv2D>(l);
}
inline bool is_pool(const Layer& l) noexcept {
  return std::holds_alternative<MaxPool1D>(l) || std::holds_alternative<MaxPool2D>(l);
}
inline bool is_dense(const Layer& l) noexcept { return std::holds_alternative<Dense>(l); }
inline bool is_dropout(const Layer& l) noexcept { return std::holds_alternative<Dropout>(l); }
inline bool is_embedding(const Layer& l) noexcept { return std::holds_alternative<Embedding>(l); }
inline bool is_2d(const Layer& l) noexcept {
  return std::holds_alternative<Conv2D>(l) || std::holds_alternative<MaxPool2D>(l);
}

// ---------------------------------------------------------------------------
// Bounds

struct IntRange {
  int min = 0;
  int max = 0;
  bool contains(int v) const noexcept { return v >= min && v <= max; }
  bool operator==(const IntRange&) const = default;
};

struct RealRange {
  double min = 0;
  double max = 0;
  bool contains(double v) const noexcept { return v >= min && v <= max; }
  bool operator==(const RealRange&) const = default;
};

/// Search-space limits. Defaults are the published bounds plus a 7-layer
/// depth cap.
struct LayerBounds {
  IntRange filters{10, 100};
  IntRange conv_kernel{1, 6};
  IntRange pool_kernel{1, 6};
  IntRange dense_units{10, 100};
  IntRange embedding_dim{100, 300};
  RealRange learning_rate{1e-4, 1e-1};
  int max_size = 7;

  /// Throws std::invalid_argument if any range is empty or non-positive.
  void check() const;

  /// Accepts any positive hyperparameter and any depth; used where only the
  /// structure of a chromosome matters (building and counting networks).
  static LayerBounds unbounded();

  bool operator==(const LayerBounds&) const = default;
};

// ---------------------------------------------------------------------------
// Chromosome

/// One candidate: learning-rate gene plus ordered layer genes, terminated by
/// a Dense output layer. `fitness` is a cache filled in by evaluation.
struct Chromosome {
  double learning_rate = 1e-3;
  std::vector<Layer> layers;
  std::optional<FitnessRecord> fitness;

  /// Number of layers excluding the terminal Dense layer.
  int interior_size() const noexcept {
    return layers.empty() ? 0 : static_cast<int>(layers.size()) - 1;
  }

  /// Same genes, ignoring the fitness cache.
  bool same_genes(const Chromosome& other) const {
    return learning_rate == other.learning_rate && layers == other.layers;
  }

  bool operator==(const Chromosome&) const = default;
};

std::string describe(const Chromosome& chromosome);

// ---------------------------------------------------------------------------
// Shapes

struct GridShape {
  int height;
  int width;
  int channels;
  bool operator==(const GridShape&) const = default;
};

struct SeqShape {
  int length;
  int channels;
  bool operator==(const SeqShape&) const = default;
};

struct FlatShape {
  int size;
  bool operator==(const FlatShape&) const = default;
};

using Shape = std::variant<GridShape, SeqShape, FlatShape>;

Shape input_shape(const TaskModality& modality);
std::int64_t flat_size(const Shape& shape) noexcept;
std::string describe(const Shape& shape);

/// Output shape of `layer` applied to `input`. Convolutions use same padding
/// and stride 1; pooling uses stride = kernel with floor division; Dense
/// flattens its input first; Dropout is the identity.
/// Throws ShapeError if the layer does not apply or an extent drops below 1.
Shape infer_shape(const Layer& layer, const Shape& input);

// ---------------------------------------------------------------------------
// Validation

struct ValidityReport {
  std::vector<std::string> violations;

  bool ok() const noexcept { return violations.empty(); }
  explicit operator bool() const noexcept { return ok(); }
};

ValidityReport validate(const Chromosome& chromosome, const TaskModality& modality,
                        int num_classes, const LayerBounds& bounds = {});

/// Trainable parameter count of one layer given its input shape.
std::int64_t layer_parameter_count(const Layer& layer, const Shape& input,
                                   const TaskModality& modality);

/// Total trainable parameters (weights, biases, embedding entries and PReLU
/// slopes). Throws InvalidChromosome if the chromosome does not validate.
std::int64_t count_parameters(const Chromosome& chromosome, const TaskModality& modality,
                              int num_classes, const LayerBounds& bounds = {});

// ---------------------------------------------------------------------------
// Random generation

enum class LayerContext { cnn, non_cnn };

Layer random_layer(LayerContext context, bool dropout_allowed, const LayerBounds& bounds,
                   Rng& rng);

Dense random_terminal_layer(int num_classes, Rng& rng);

/// Log-uniform draw from bounds.learning_rate.
double random_learning_rate(const LayerBounds& bounds, Rng& rng);

inline constexpr int kMaxGenerationAttempts = 100;

/// Builds a chromosome with `size` interior layers plus the terminal Dense.
/// Invalid drafts are discarded and redrawn; throws RetryExhausted after
/// kMaxGenerationAttempts consecutive failures. Requires 1 <= size <= max_size.
Chromosome random_chromosome(int size, const TaskModality& modality, int num_classes,
                             const LayerBounds& bounds, Rng& rng);

}  // namespace archevo
