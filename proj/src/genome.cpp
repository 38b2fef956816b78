#include "archevo/genome.hpp"

#include <algorithm>
#include <climits>
#include <limits>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "archevo/errors.hpp"
#include "archevo/overloaded.hpp"

namespace archevo {

namespace {

template <typename T, std::size_t N>
T pick(const T (&options)[N], Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(0, N - 1);
  return options[d(rng)];
}

int uniform_int(IntRange r, Rng& rng) {
  std::uniform_int_distribution<int> d(r.min, r.max);
  return d(rng);
}

bool coin(Rng& rng) { return std::bernoulli_distribution(0.5)(rng); }

std::string range_text(IntRange r) {
  return "[" + std::to_string(r.min) + "," + std::to_string(r.max) + "]";
}

}  // namespace

// ---------------------------------------------------------------------------

TaskModality TaskModality::image2d(int height, int width, int channels) {
  if (height < 1 || width < 1 || channels < 1)
    throw std::invalid_argument("image2d dimensions must be >= 1");
  return TaskModality{Image2D{height, width, channels}};
}

TaskModality TaskModality::sequence(int max_length, int vocab_size) {
  if (max_length < 1 || vocab_size < 1)
    throw std::invalid_argument("sequence max_length and vocab_size must be >= 1");
  return TaskModality{Sequence{max_length, vocab_size}};
}

std::string TaskModality::describe() const {
  return std::visit(Overloaded{
                        [](const Image2D& m) {
                          return "image2d(" + std::to_string(m.height) + "," +
                                 std::to_string(m.width) + "," + std::to_string(m.channels) +
                                 ")";
                        },
                        [](const Sequence& m) {
                          return "sequence(" + std::to_string(m.max_length) + "," +
                                 std::to_string(m.vocab_size) + ")";
                        },
                    },
                    kind);
}

std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::prelu: return "prelu";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax: return "softmax";
  }
  return "?";
}

std::optional<Activation> parse_activation(std::string_view name) noexcept {
  for (Activation a : {Activation::linear, Activation::leaky_relu, Activation::prelu,
                       Activation::relu, Activation::sigmoid, Activation::softmax}) {
    if (to_string(a) == name) return a;
  }
  return std::nullopt;
}

bool is_conv_activation(Activation a) noexcept {
  for (Activation x : kConvActivations)
    if (x == a) return true;
  return false;
}

bool is_dense_activation(Activation a) noexcept {
  for (Activation x : kDenseActivations)
    if (x == a) return true;
  return false;
}

bool is_terminal_activation(Activation a) noexcept {
  for (Activation x : kTerminalActivations)
    if (x == a) return true;
  return false;
}

std::string_view layer_type_name(const Layer& layer) noexcept {
  return std::visit(Overloaded{
                        [](const Conv1D&) -> std::string_view { return "conv1d"; },
                        [](const Conv2D&) -> std::string_view { return "conv2d"; },
                        [](const MaxPool1D&) -> std::string_view { return "maxpool1d"; },
                        [](const MaxPool2D&) -> std::string_view { return "maxpool2d"; },
                        [](const Dense&) -> std::string_view { return "dense"; },
                        [](const Dropout&) -> std::string_view { return "dropout"; },
                        [](const Embedding&) -> std::string_view { return "embedding"; },
                    },
                    layer);
}

std::string describe(const Layer& layer) {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const Conv1D& l) {
                   os << "Conv1D(" << l.filters << ",k=" << l.kernel << ","
                      << to_string(l.activation) << ")";
                 },
                 [&](const Conv2D& l) {
                   os << "Conv2D(" << l.filters << ",k=" << l.kernel << ","
                      << to_string(l.activation) << ")";
                 },
                 [&](const MaxPool1D& l) { os << "MaxPool1D(k=" << l.kernel << ")"; },
                 [&](const MaxPool2D& l) { os << "MaxPool2D(k=" << l.kernel << ")"; },
                 [&](const Dense& l) {
                   os << "Dense(" << l.units << "," << to_string(l.activation) << ")";
                 },
                 [&](const Dropout& l) { os << "Dropout(" << l.keep_prob << ")"; },
                 [&](const Embedding& l) { os << "Embedding(" << l.output_dim << ")"; },
             },
             layer);
  return os.str();
}

std::string describe(const Chromosome& chromosome) {
  std::ostringstream os;
  os << "lr=" << chromosome.learning_rate << " [";
  for (std::size_t i = 0; i < chromosome.layers.size(); ++i) {
    if (i) os << ", ";
    os << describe(chromosome.layers[i]);
  }
  os << "]";
  return os.str();
}

void LayerBounds::check() const {
  auto check_int = [](IntRange r, const char* name) {
    if (r.min < 1 || r.max < r.min)
      throw std::invalid_argument(std::string("invalid bounds for ") + name);
  };
  check_int(filters, "filters");
  check_int(conv_kernel, "conv_kernel");
  check_int(pool_kernel, "pool_kernel");
  check_int(dense_units, "dense_units");
  check_int(embedding_dim, "embedding_dim");
  if (!(learning_rate.min > 0) || learning_rate.max < learning_rate.min)
    throw std::invalid_argument("invalid bounds for learning_rate");
  if (max_size < 1) throw std::invalid_argument("max_size must be >= 1");
}

LayerBounds LayerBounds::unbounded() {
  LayerBounds b;
  b.filters = {1, INT_MAX};
  b.conv_kernel = {1, INT_MAX};
  b.pool_kernel = {1, INT_MAX};
  b.dense_units = {1, INT_MAX};
  b.embedding_dim = {1, INT_MAX};
  b.learning_rate = {std::numeric_limits<double>::min(), std::numeric_limits<double>::max()};
  b.max_size = INT_MAX - 1;
  return b;
}

// ---------------------------------------------------------------------------
// Shapes

Shape input_shape(const TaskModality& modality) {
  return std::visit(Overloaded{
                        [](const Image2D& m) -> Shape {
                          return GridShape{m.height, m.width, m.channels};
                        },
                        [](const Sequence& m) -> Shape { return SeqShape{m.max_length, 1}; },
                    },
                    modality.kind);
}

std::int64_t flat_size(const Shape& shape) noexcept {
  return std::visit(Overloaded{
                        [](const GridShape& s) {
                          return std::int64_t{s.height} * s.width * s.channels;
                        },
                        [](const SeqShape& s) { return std::int64_t{s.length} * s.channels; },
                        [](const FlatShape& s) { return std::int64_t{s.size}; },
                    },
                    shape);
}

std::string describe(const Shape& shape) {
  return std::visit(Overloaded{
                        [](const GridShape& s) {
                          return "grid(" + std::to_string(s.height) + "," +
                                 std::to_string(s.width) + "," + std::to_string(s.channels) +
                                 ")";
                        },
                        [](const SeqShape& s) {
                          return "seq(" + std::to_string(s.length) + "," +
                                 std::to_string(s.channels) + ")";
                        },
                        [](const FlatShape& s) { return "flat(" + std::to_string(s.size) + ")"; },
                    },
                    shape);
}

Shape infer_shape(const Layer& layer, const Shape& input) {
  auto inapplicable = [&]() -> ShapeError {
    return ShapeError(std::string(layer_type_name(layer)) + " cannot be applied to " +
                      describe(input));
  };
  const auto* grid = std::get_if<GridShape>(&input);
  const auto* seq = std::get_if<SeqShape>(&input);

  return std::visit(
      Overloaded{
          [&](const Conv2D& l) -> Shape {
            if (!grid) throw inapplicable();
            return GridShape{grid->height, grid->width, l.filters};
          },
          [&](const Conv1D& l) -> Shape {
            if (!seq) throw inapplicable();
            return SeqShape{seq->length, l.filters};
          },
          [&](const MaxPool2D& l) -> Shape {
            if (!grid) throw inapplicable();
            if (l.kernel < 1) throw ShapeError("pool kernel must be >= 1");
            GridShape out{grid->height / l.kernel, grid->width / l.kernel, grid->channels};
            if (out.height < 1 || out.width < 1)
              throw ShapeError("spatial extent < 1 after maxpool2d(k=" +
                               std::to_string(l.kernel) + ") on " + describe(input));
            return out;
          },
          [&](const MaxPool1D& l) -> Shape {
            if (!seq) throw inapplicable();
            if (l.kernel < 1) throw ShapeError("pool kernel must be >= 1");
            SeqShape out{seq->length / l.kernel, seq->channels};
            if (out.length < 1)
              throw ShapeError("spatial extent < 1 after maxpool1d(k=" +
                               std::to_string(l.kernel) + ") on " + describe(input));
            return out;
          },
          [&](const Dense& l) -> Shape { return FlatShape{l.units}; },
          [&](const Dropout&) -> Shape { return input; },
          [&](const Embedding& l) -> Shape {
            if (!seq || seq->channels != 1) throw inapplicable();
            return SeqShape{seq->length, l.output_dim};
          },
      },
      layer);
}

// ---------------------------------------------------------------------------
// Validation and parameter counting

namespace {

void check_layer_bounds(const Layer& layer, std::size_t index, bool terminal,
                        const LayerBounds& bounds, std::vector<std::string>& out) {
  const std::string where =
      "layer " + std::to_string(index) + " (" + std::string(layer_type_name(layer)) + "): ";
  auto check_range = [&](int v, IntRange r, const char* field) {
    if (!r.contains(v))
      out.push_back(where + field + " " + std::to_string(v) + " out of " + range_text(r));
  };
  auto check_conv_act = [&](Activation a) {
    if (!is_conv_activation(a))
      out.push_back(where + "activation " + std::string(to_string(a)) +
                    " not allowed on convolution layers");
  };
  std::visit(Overloaded{
                 [&](const Conv1D& l) {
                   check_range(l.filters, bounds.filters, "filters");
                   check_range(l.kernel, bounds.conv_kernel, "kernel");
                   check_conv_act(l.activation);
                 },
                 [&](const Conv2D& l) {
                   check_range(l.filters, bounds.filters, "filters");
                   check_range(l.kernel, bounds.conv_kernel, "kernel");
                   check_conv_act(l.activation);
                 },
                 [&](const MaxPool1D& l) { check_range(l.kernel, bounds.pool_kernel, "kernel"); },
                 [&](const MaxPool2D& l) { check_range(l.kernel, bounds.pool_kernel, "kernel"); },
                 [&](const Dense& l) {
                   if (terminal) {
                     if (!is_terminal_activation(l.activation))
                       out.push_back(where + "activation " + std::string(to_string(l.activation)) +
                                     " not allowed on the terminal layer");
                     return;
                   }
                   check_range(l.units, bounds.dense_units, "units");
                   if (!is_dense_activation(l.activation))
                     out.push_back(where + "activation " + std::string(to_string(l.activation)) +
                                   " not allowed on dense layers");
                 },
                 [&](const Dropout& l) {
                   if (!(l.keep_prob > 0.0 && l.keep_prob < 1.0))
                     out.push_back(where + "keep_prob out of (0,1)");
                 },
                 [&](const Embedding& l) {
                   check_range(l.output_dim, bounds.embedding_dim, "output_dim");
                 },
             },
             layer);
}

}  // namespace

ValidityReport validate(const Chromosome& chromosome, const TaskModality& modality,
                        int num_classes, const LayerBounds& bounds) {
  ValidityReport report;
  auto& v = report.violations;
  const auto& layers = chromosome.layers;

  if (!bounds.learning_rate.contains(chromosome.learning_rate))
    v.push_back("learning_rate out of bounds");
  if (layers.empty()) {
    v.push_back("chromosome has no layers");
    return report;
  }
  if (layers.size() < 2) v.push_back("chromosome has no interior layers");
  if (static_cast<int>(layers.size()) > bounds.max_size + 1)
    v.push_back("layer count " + std::to_string(layers.size()) + " exceeds max_size + 1 (" +
                std::to_string(bounds.max_size + 1) + ")");

  const std::size_t last = layers.size() - 1;
  bool seen_dense = false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& layer = layers[i];
    const std::string where =
        "layer " + std::to_string(i) + " (" + std::string(layer_type_name(layer)) + "): ";
    if (modality.is_sequence() && is_2d(layer)) v.push_back(where + "2D layer on sequence modality");
    if (modality.is_image() && is_embedding(layer)) v.push_back(where + "Embedding on image modality");
    if (is_embedding(layer) && i != 0) v.push_back(where + "Embedding only allowed at position 0");
    if (i == 0 && modality.is_sequence() && !is_embedding(layer) && last > 0)
      v.push_back(where + "sequence modality must begin with Embedding");
    if (i == 0 && is_dropout(layer)) v.push_back(where + "first layer is Dropout");
    if (seen_dense && (is_conv(layer) || is_pool(layer)))
      v.push_back(where + "convolution/pooling layer after a Dense layer");
    if (is_dense(layer)) seen_dense = true;
    check_layer_bounds(layer, i, i == last, bounds, v);
  }

  const auto* terminal = std::get_if<Dense>(&layers[last]);
  if (!terminal) {
    v.push_back("last layer must be Dense");
  } else if (terminal->units != num_classes) {
    v.push_back("terminal Dense units " + std::to_string(terminal->units) +
                " != num_classes " + std::to_string(num_classes));
  }

  Shape shape = input_shape(modality);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    try {
      shape = infer_shape(layers[i], shape);
    } catch (const ShapeError& e) {
      v.push_back("layer " + std::to_string(i) + ": " + e.what());
      break;
    }
  }
  return report;
}

std::int64_t layer_parameter_count(const Layer& layer, const Shape& input,
                                   const TaskModality& modality) {
  (void)infer_shape(layer, input);
  auto channels_of = [](const Shape& s) -> std::int64_t {
    if (const auto* g = std::get_if<GridShape>(&s)) return g->channels;
    if (const auto* q = std::get_if<SeqShape>(&s)) return q->channels;
    return std::get<FlatShape>(s).size;
  };
  auto prelu = [](Activation a, std::int64_t channels) -> std::int64_t {
    return a == Activation::prelu ? channels : 0;
  };
  return std::visit(
      Overloaded{
          [&](const Conv2D& l) -> std::int64_t {
            const std::int64_t k = l.kernel;
            return (k * k * channels_of(input) + 1) * l.filters + prelu(l.activation, l.filters);
          },
          [&](const Conv1D& l) -> std::int64_t {
            return (std::int64_t{l.kernel} * channels_of(input) + 1) * l.filters +
                   prelu(l.activation, l.filters);
          },
          [&](const Dense& l) -> std::int64_t {
            return (flat_size(input) + 1) * l.units + prelu(l.activation, l.units);
          },
          [&](const Embedding& l) -> std::int64_t {
            const auto* seq = std::get_if<Sequence>(&modality.kind);
            if (!seq) throw ShapeError("embedding requires sequence modality");
            return std::int64_t{seq->vocab_size} * l.output_dim;
          },
          [&](const auto&) -> std::int64_t { return 0; },
      },
      layer);
}

std::int64_t count_parameters(const Chromosome& chromosome, const TaskModality& modality,
                              int num_classes, const LayerBounds& bounds) {
  const ValidityReport report = validate(chromosome, modality, num_classes, bounds);
  if (!report.ok()) throw InvalidChromosome("cannot count parameters: " + report.violations.front());
  std::int64_t total = 0;
  Shape shape = input_shape(modality);
  for (const Layer& layer : chromosome.layers) {
    total += layer_parameter_count(layer, shape, modality);
    shape = infer_shape(layer, shape);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Random generation

namespace {

Layer random_conv(const LayerBounds& bounds, Rng& rng) {
  const bool two_d = coin(rng);
  const int filters = uniform_int(bounds.filters, rng);
  const int kernel = uniform_int(bounds.conv_kernel, rng);
  const Activation act = pick(kConvActivations, rng);
  if (two_d) return Conv2D{filters, kernel, act};
  return Conv1D{filters, kernel, act};
}

Layer random_pool(const LayerBounds& bounds, Rng& rng) {
  const bool two_d = coin(rng);
  const int kernel = uniform_int(bounds.pool_kernel, rng);
  if (two_d) return MaxPool2D{kernel};
  return MaxPool1D{kernel};
}

Layer random_dense(const LayerBounds& bounds, Rng& rng) {
  const int units = uniform_int(bounds.dense_units, rng);
  return Dense{units, pick(kDenseActivations, rng)};
}

Layer random_dropout(Rng& rng) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  double p = 0.0;
  while (p <= 0.0 || p >= 1.0) p = d(rng);
  return Dropout{p};
}

}  // namespace

Layer random_layer(LayerContext context, bool dropout_allowed, const LayerBounds& bounds,
                   Rng& rng) {
  if (context == LayerContext::cnn) {
    if (!dropout_allowed) return random_conv(bounds, rng);
    switch (std::uniform_int_distribution<int>(0, 3)(rng)) {
      case 0: return random_conv(bounds, rng);
      case 1: return random_dense(bounds, rng);
      case 2: return random_pool(bounds, rng);
      default: return random_dropout(rng);
    }
  }
  if (dropout_allowed && coin(rng)) return random_dropout(rng);
  return random_dense(bounds, rng);
}

Dense random_terminal_layer(int num_classes, Rng& rng) {
  return Dense{num_classes, pick(kTerminalActivations, rng)};
}

double random_learning_rate(const LayerBounds& bounds, Rng& rng) {
  std::uniform_real_distribution<double> d(std::log(bounds.learning_rate.min),
                                           std::log(bounds.learning_rate.max));
  const double lr = std::exp(d(rng));
  return std::clamp(lr, bounds.learning_rate.min, bounds.learning_rate.max);
}

Chromosome random_chromosome(int size, const TaskModality& modality, int num_classes,
                             const LayerBounds& bounds, Rng& rng) {
  if (size < 1) throw std::invalid_argument("chromosome size must be >= 1");
  if (size > bounds.max_size)
    throw std::invalid_argument("chromosome size " + std::to_string(size) + " exceeds max_size " +
                                std::to_string(bounds.max_size));
  if (num_classes < 1) throw std::invalid_argument("num_classes must be >= 1");

  for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
    Chromosome draft;
    draft.layers.reserve(static_cast<std::size_t>(size) + 1);
    LayerContext context = LayerContext::cnn;
    for (int i = 0; i < size; ++i) {
      Layer layer = (i == 0 && modality.is_sequence())
                        ? Layer{Embedding{uniform_int(bounds.embedding_dim, rng)}}
                        : random_layer(context, i != 0, bounds, rng);
      if (is_dense(layer)) context = LayerContext::non_cnn;
      draft.layers.push_back(layer);
    }
    draft.layers.emplace_back(random_terminal_layer(num_classes, rng));
    draft.learning_rate = random_learning_rate(bounds, rng);
    if (validate(draft, modality, num_classes, bounds).ok()) return draft;
  }
  throw RetryExhausted("random_chromosome: no valid architecture of size " +
                       std::to_string(size) + " for " + modality.describe() + " after " +
                       std::to_string(kMaxGenerationAttempts) + " attempts");
}

}  // namespace archevo
