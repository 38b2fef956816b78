#include "archevo/cli/runner.hpp"

#include <charconv>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "archevo/errors.hpp"
#include "archevo/nn/surrogate.hpp"
#include "archevo/nn/trainer.hpp"

namespace archevo::cli {

namespace {

using json = nlohmann::ordered_json;

void write_file(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out << text;
    if (!out.flush()) throw Error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace

std::unique_ptr<Evaluator> make_evaluator(EvaluatorKind kind, const nn::TrainingHyper& hyper) {
  if (kind == EvaluatorKind::surrogate) return std::make_unique<nn::SurrogateEvaluator>();
  return std::make_unique<nn::MicroNNEvaluator>(hyper);
}

std::string format_real(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string stats_row(const GenerationStats& s) {
  return std::to_string(s.generation) + "," + format_real(s.fitness_mean) + "," +
         format_real(s.fitness_p5) + "," + format_real(s.fitness_p95) + "," +
         format_real(s.lr_mean) + "," + format_real(s.lr_p5) + "," + format_real(s.lr_p95);
}

std::string event_line(const GenerationStats& s, const Chromosome& best) {
  json j;
  j["event"] = "generation";
  j["generation"] = s.generation;
  j["epochs"] = s.epochs;
  j["population_size"] = s.population_size;
  j["fitness_mean"] = s.fitness_mean;
  j["fitness_p5"] = s.fitness_p5;
  j["fitness_p95"] = s.fitness_p95;
  j["fitness_best"] = s.fitness_best;
  j["lr_mean"] = s.lr_mean;
  j["lr_p5"] = s.lr_p5;
  j["lr_p95"] = s.lr_p95;
  j["best_val_accuracy"] = s.best_val_accuracy;
  j["best_n_params"] = s.best_n_params;
  j["best"] = json::parse(serialize(best));
  return j.dump();
}

double test_accuracy(const Chromosome& chromosome, const Dataset& dataset, EvaluatorKind kind,
                     const nn::TrainingHyper& hyper, int epochs, std::uint64_t seed) {
  if (kind == EvaluatorKind::surrogate) return 1.0 - nn::surrogate_val_error(chromosome);
  Rng rng(seed);
  try {
    auto trained = nn::train(chromosome, dataset, epochs, hyper, rng);
    return 1.0 - nn::error_rate(trained.network, dataset.test, hyper.batch_size);
  } catch (const NonFiniteLoss&) {
    return 0.0;
  }
}

RunSummary run(const RunConfig& config, std::ostream* log) {
  check_config(config);
  const Dataset dataset = load_dataset(config.dataset);
  const auto evaluator = make_evaluator(config.evaluator, config.hyper);

  std::filesystem::create_directories(config.output_dir);
  const auto best_path = config.output_dir / kBestFile;
  auto stats = open_output(config.output_dir / kStatsFile);
  auto events = open_output(config.output_dir / kEventsFile);
  stats << kStatsHeader << '\n' << std::flush;

  const Observer observer = [&](int generation, const GenerationStats& s, const Chromosome& best) {
    stats << stats_row(s) << '\n' << std::flush;
    events << event_line(s, best) << '\n' << std::flush;
    if (!stats || !events) throw Error("failed to write run logs");
    write_file(best_path, serialize(best));
    if (log)
      *log << "generation " << generation << ": epochs " << s.epochs << ", population "
           << s.population_size << ", mean fitness " << format_real(s.fitness_mean)
           << ", best fitness " << format_real(s.fitness_best) << std::endl;
  };
  EvolutionResult result = run_evolution(config.evolution, dataset, *evaluator, observer);

  RunAnnotation annotation;
  annotation.epochs = scheduled_epochs(config.evolution, config.evolution.generation_max);
  annotation.seed = config.evolution.seed;
  annotation.evaluator = std::string(to_string(config.evaluator));
  annotation.batch_size = config.hyper.batch_size;
  annotation.test_accuracy = test_accuracy(result.best, dataset, config.evaluator, config.hyper,
                                           annotation.epochs, annotation.seed);
  write_file(best_path, serialize(ChromosomeDocument{result.best, annotation}));
  if (log) *log << "best: " << describe(result.best) << std::endl;
  return {std::move(result), annotation, config.output_dir};
}

ReportResult report(const ChromosomeDocument& document, const Dataset& dataset,
                    const ReportOptions& options) {
  const Chromosome& c = document.chromosome;
  if (const auto v = validate(c, dataset.modality, dataset.num_classes, LayerBounds::unbounded());
      !v)
    throw DataError("chromosome does not fit dataset (" + dataset.modality.describe() + ", " +
                    std::to_string(dataset.num_classes) + " classes): " + v.violations.front());

  ReportResult r;
  r.epochs = options.epochs.value_or(document.run ? document.run->epochs : 13);
  r.seed = options.seed.value_or(document.run ? document.run->seed : 0);
  if (options.evaluator) {
    r.evaluator = *options.evaluator;
  } else if (document.run) {
    const auto kind = parse_evaluator_kind(document.run->evaluator);
    if (!kind) throw ConfigError("run.evaluator", "unknown evaluator '" + document.run->evaluator + "'");
    r.evaluator = *kind;
  }
  nn::TrainingHyper hyper;
  hyper.batch_size = options.batch_size.value_or(document.run ? document.run->batch_size
                                                              : hyper.batch_size);
  hyper.check();
  r.n_params = count_parameters(c, dataset.modality, dataset.num_classes, LayerBounds::unbounded());
  r.test_accuracy = test_accuracy(c, dataset, r.evaluator, hyper, r.epochs, r.seed);
  return r;
}

void synth(SynthKind kind, const std::filesystem::path& out_dir, std::uint64_t seed) {
  std::filesystem::create_directories(out_dir);
  if (kind == SynthKind::image) {
    SynthImageSpec spec;
    spec.seed = seed;
    const Dataset d = synth_image_dataset(spec);
    write_image_csv(out_dir / "train.csv", d.train);
    write_image_csv(out_dir / "validation.csv", d.validation);
    write_image_csv(out_dir / "test.csv", d.test);
    return;
  }
  SynthSentimentSpec spec;
  spec.seed = seed;
  const SentimentCorpus corpus = synth_sentiment_corpus(spec);
  write_text_corpus(out_dir / "train.tsv", corpus.train);
  write_text_corpus(out_dir / "validation.tsv", corpus.validation);
  write_text_corpus(out_dir / "test.tsv", corpus.test);
}

}  // namespace archevo::cli
