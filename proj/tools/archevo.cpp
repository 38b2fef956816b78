// Command-line front end: run, report, synth.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "archevo/cli/runner.hpp"
#include "archevo/errors.hpp"

namespace {

using namespace archevo;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evolves neural network architectures with a genetic algorithm"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "Run an evolution from a config file");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> sets;
  run_cmd->add_option("--config", config_path, "Config file (key = value lines)")->required();
  run_cmd->add_option("--seed", seed, "Override the config seed");
  run_cmd->add_option("--out", out_dir, "Override the output directory");
  run_cmd->add_option("--set", sets, "Override any config key (key=value)");

  auto* report_cmd = app.add_subcommand("report", "Retrain a chromosome and report test accuracy");
  std::string chromosome_path, dataset_text, evaluator_name;
  std::optional<int> report_epochs, report_batch;
  std::optional<std::uint64_t> report_seed;
  report_cmd->add_option("--chromosome", chromosome_path, "Chromosome JSON file")->required();
  report_cmd->add_option("--dataset", dataset_text, "Dataset descriptor")->required();
  report_cmd->add_option("--epochs", report_epochs, "Training epochs");
  report_cmd->add_option("--seed", report_seed, "Training seed");
  report_cmd->add_option("--batch-size", report_batch, "Minibatch size");
  report_cmd->add_option("--evaluator", evaluator_name, "micro_nn or surrogate")
      ->check(CLI::IsMember({"micro_nn", "surrogate"}));

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset");
  std::string kind;
  std::string synth_out;
  std::uint64_t synth_seed = 0;
  synth_cmd->add_option("--kind", kind, "image or sentiment")
      ->required()
      ->check(CLI::IsMember({"image", "sentiment"}));
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth_seed, "Generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      cli::Overrides overrides;
      for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError(s, "--set expects key=value");
        overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
      }
      if (seed) overrides.emplace_back("seed", std::to_string(*seed));
      if (!out_dir.empty()) overrides.emplace_back("output_dir", out_dir);
      const auto config = cli::load_config(config_path, overrides);
      const auto summary = cli::run(config, &std::cerr);
      std::cout << "best chromosome: " << (summary.output_dir / cli::kBestFile).string() << "\n"
                << "test accuracy: " << cli::format_real(summary.annotation.test_accuracy)
                << "\n";
    } else if (report_cmd->parsed()) {
      const auto document = deserialize_document(read_file(chromosome_path),
                                                  LayerBounds::unbounded());
      const Dataset dataset = cli::load_dataset(dataset_text);
      cli::ReportOptions options;
      options.epochs = report_epochs;
      options.seed = report_seed;
      options.batch_size = report_batch;
      if (!evaluator_name.empty()) options.evaluator = cli::parse_evaluator_kind(evaluator_name);
      const auto r = cli::report(document, dataset, options);
      std::cout << "test accuracy: " << cli::format_real(r.test_accuracy) << "\n"
                << "parameters: " << r.n_params << "\n"
                << "epochs: " << r.epochs << "\n"
                << "seed: " << r.seed << "\n"
                << "evaluator: " << cli::to_string(r.evaluator) << "\n";
    } else if (synth_cmd->parsed()) {
      cli::synth(kind == "image" ? cli::SynthKind::image : cli::SynthKind::sentiment, synth_out,
                 synth_seed);
      std::cout << "wrote " << kind << " dataset to " << synth_out << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
