#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "archevo/data.hpp"
#include "archevo/evolution.hpp"
#include "archevo/nn/network.hpp"

namespace archevo::cli {

enum class EvaluatorKind { micro_nn, surrogate };

std::string_view to_string(EvaluatorKind kind) noexcept;
std::optional<EvaluatorKind> parse_evaluator_kind(std::string_view name) noexcept;

/// "kind" or "kind:key=value,key=value". Kinds: synth-image, synth-sentiment,
/// image-csv, text-tsv.
struct DatasetSpec {
  std::string kind;
  std::map<std::string, std::string> options;
};

/// Throws ConfigError("dataset", ...) on syntax errors or unknown kinds.
DatasetSpec parse_dataset_spec(std::string_view text);

/// Builds or loads the dataset. Unknown options raise ConfigError.
Dataset load_dataset(const DatasetSpec& spec);
Dataset load_dataset(std::string_view text);

/// Throws ConfigError when a file the descriptor refers to is missing.
void check_dataset_paths(const DatasetSpec& spec);

struct RunConfig {
  EvolutionConfig evolution;
  nn::TrainingHyper hyper;
  std::string dataset;
  EvaluatorKind evaluator = EvaluatorKind::micro_nn;
  std::filesystem::path output_dir = "archevo_run";
  bool has_seed = false;
};

/// Every key accepted in a config file.
const std::vector<std::string>& config_keys();

/// Assigns one key. Throws ConfigError naming the key when it is unknown or
/// the value does not parse as the key's type.
void set_config_value(RunConfig& config, std::string_view key, std::string_view value);

using Overrides = std::vector<std::pair<std::string, std::string>>;

/// Parses "key = value" lines ('#' starts a comment, blank lines ignored),
/// applies `overrides` on top, then runs check_config.
RunConfig parse_config(std::string_view text, const Overrides& overrides = {});
RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {});

/// Throws ConfigError if the seed or dataset is missing, a value is out of
/// range, or a referenced path does not exist.
void check_config(const RunConfig& config);

}  // namespace archevo::cli
