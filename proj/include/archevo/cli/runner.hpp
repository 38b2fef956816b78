#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

#include "archevo/cli/config.hpp"
#include "archevo/evolution.hpp"
#include "archevo/serialize.hpp"

namespace archevo::cli {

inline constexpr const char* kStatsHeader =
    "generation,fitness_mean,fitness_p5,fitness_p95,lr_mean,lr_p5,lr_p95";
inline constexpr const char* kEventsFile = "events.jsonl";
inline constexpr const char* kStatsFile = "stats.csv";
inline constexpr const char* kBestFile = "best_chromosome.json";

std::unique_ptr<Evaluator> make_evaluator(EvaluatorKind kind, const nn::TrainingHyper& hyper);

/// Shortest decimal text that parses back to the same double.
std::string format_real(double value);

/// One stats.csv data row (no trailing newline).
std::string stats_row(const GenerationStats& stats);

/// One events.jsonl record (no trailing newline).
std::string event_line(const GenerationStats& stats, const Chromosome& best);

/// Test-set accuracy of `chromosome`. micro_nn retrains from Rng(seed) for
/// `epochs` epochs; surrogate returns 1 - surrogate validation error.
double test_accuracy(const Chromosome& chromosome, const Dataset& dataset, EvaluatorKind kind,
                     const nn::TrainingHyper& hyper, int epochs, std::uint64_t seed);

struct RunSummary {
  EvolutionResult result;
  RunAnnotation annotation;
  std::filesystem::path output_dir;
};

/// Runs the evolution and writes events.jsonl, stats.csv and
/// best_chromosome.json into config.output_dir, flushing after every
/// generation. Progress lines go to `log` when given.
RunSummary run(const RunConfig& config, std::ostream* log = nullptr);

struct ReportOptions {
  std::optional<int> epochs;           // default: the document's run block, else 13
  std::optional<std::uint64_t> seed;   // default: the document's run block, else 0
  std::optional<EvaluatorKind> evaluator;
  std::optional<int> batch_size;
};

struct ReportResult {
  double test_accuracy = 0;
  std::int64_t n_params = 0;
  int epochs = 0;
  std::uint64_t seed = 0;
  EvaluatorKind evaluator = EvaluatorKind::micro_nn;
};

/// Retrains the chromosome and measures test accuracy. Throws DataError when
/// the chromosome does not fit the dataset's modality or class count.
ReportResult report(const ChromosomeDocument& document, const Dataset& dataset,
                    const ReportOptions& options = {});

enum class SynthKind { image, sentiment };

/// Writes train/validation/test files (image: *.csv, sentiment: *.tsv) into
/// `out_dir` using the default synthetic specs with the given seed.
void synth(SynthKind kind, const std::filesystem::path& out_dir, std::uint64_t seed);

}  // namespace archevo::cli
