#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "archevo/genome.hpp"

namespace archevo {

/// Extra block written next to the best chromosome of a run. `epochs` and
/// `seed`, `evaluator` and `batch_size` are what `report` uses to retrain
/// the network.
struct RunAnnotation {
  double test_accuracy = 0.0;
  std::uint64_t seed = 0;
  int epochs = 1;
  std::string evaluator = "micro_nn";
  int batch_size = 1024;
  bool operator==(const RunAnnotation&) const = default;
};

struct ChromosomeDocument {
  Chromosome chromosome;
  std::optional<RunAnnotation> run;
  bool operator==(const ChromosomeDocument&) const = default;
};

/// JSON document:
///
///   {"learning_rate": 0.0023,
///    "layers": [{"type": "embedding", "output_dim": 120},
///               {"type": "conv1d", "filters": 32, "kernel": 3, "activation": "relu"},
///               {"type": "dense", "units": 2, "activation": "sigmoid"}],
///    "fitness": {"val_error": 0.1, "n_params": 1000, "score": 1.099, ...}}
std::string serialize(const Chromosome& chromosome);
std::string serialize(const ChromosomeDocument& document);

/// Throws ParseError for malformed JSON and SchemaError (naming the field)
/// for structural or bounds violations.
Chromosome deserialize(std::string_view text, const LayerBounds& bounds = {});
ChromosomeDocument deserialize_document(std::string_view text, const LayerBounds& bounds = {});

}  // namespace archevo
