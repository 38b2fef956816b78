#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <sstream>

#include "archevo/cli/config.hpp"
#include "archevo/cli/runner.hpp"
#include "archevo/errors.hpp"
#include "archevo/evolution.hpp"
#include "archevo/fitness.hpp"
#include "archevo/nn/surrogate.hpp"
#include "archevo/serialize.hpp"

namespace py = pybind11;
using namespace archevo;

namespace {

// Python values are passed through their str() form, so {"alpha": 0.5} and
// {"alpha": "0.5"} are equivalent.
cli::RunConfig config_from(const py::dict& values) {
  cli::RunConfig config;
  for (const auto& [k, v] : values) {
    const std::string key = py::str(k);
    const std::string value =
        py::isinstance<py::bool_>(v) ? (v.cast<bool>() ? "1" : "0") : std::string(py::str(v));
    cli::set_config_value(config, key, value);
    if (key == "seed") config.has_seed = true;
  }
  return config;
}

py::dict fitness_dict(const FitnessRecord& f) {
  py::dict d;
  d["val_error"] = f.val_error;
  d["n_params"] = f.n_params;
  d["score"] = f.score;
  d["alpha"] = f.alpha;
  d["epochs_used"] = f.epochs_used;
  d["diverged"] = f.diverged;
  return d;
}

py::dict stats_dict(const GenerationStats& s) {
  py::dict d;
  d["generation"] = s.generation;
  d["epochs"] = s.epochs;
  d["population_size"] = s.population_size;
  d["fitness_mean"] = s.fitness_mean;
  d["fitness_p5"] = s.fitness_p5;
  d["fitness_p95"] = s.fitness_p95;
  d["fitness_best"] = s.fitness_best;
  d["lr_mean"] = s.lr_mean;
  d["lr_p5"] = s.lr_p5;
  d["lr_p95"] = s.lr_p95;
  d["best_val_accuracy"] = s.best_val_accuracy;
  d["best_n_params"] = s.best_n_params;
  return d;
}

std::unique_ptr<Evaluator> evaluator_from(const std::string& name, const cli::RunConfig& config) {
  const auto kind = cli::parse_evaluator_kind(name);
  if (!kind) throw ConfigError("evaluator", "unknown evaluator '" + name + "'");
  return cli::make_evaluator(*kind, config.hyper);
}

py::object layers_of(const Chromosome& c) {
  auto json = py::module_::import("json");
  return json.attr("loads")(serialize(c))["layers"];
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Evolutionary search over small neural network architectures.";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", error.ptr());
  py::register_exception<InvalidChromosome>(m, "InvalidChromosome", error.ptr());
  py::register_exception<RetryExhausted>(m, "RetryExhausted", error.ptr());
  py::register_exception<ParseError>(m, "ParseError", error.ptr());
  py::register_exception<SchemaError>(m, "SchemaError", error.ptr());
  py::register_exception<NonFiniteLoss>(m, "NonFiniteLoss", error.ptr());
  py::register_exception<DataError>(m, "DataError", error.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<EvaluationError>(m, "EvaluationError", error.ptr());

  py::class_<TaskModality>(m, "TaskModality")
      .def_static("image2d", &TaskModality::image2d, py::arg("height"), py::arg("width"),
                  py::arg("channels"))
      .def_static("sequence", &TaskModality::sequence, py::arg("max_length"),
                  py::arg("vocab_size"))
      .def_property_readonly("is_image", &TaskModality::is_image)
      .def_property_readonly("is_sequence", &TaskModality::is_sequence)
      .def("__eq__", [](const TaskModality& a, const TaskModality& b) { return a == b; })
      .def("__repr__", &TaskModality::describe);

  py::class_<Chromosome>(m, "Chromosome")
      .def_static(
          "from_json", [](const std::string& text) { return deserialize(text); }, py::arg("text"))
      .def("to_json", [](const Chromosome& c) { return serialize(c); })
      .def_readwrite("learning_rate", &Chromosome::learning_rate)
      .def_property_readonly("layers", &layers_of)
      .def_property_readonly("interior_size", &Chromosome::interior_size)
      .def_property_readonly("fitness",
                             [](const Chromosome& c) -> py::object {
                               if (!c.fitness) return py::none();
                               return fitness_dict(*c.fitness);
                             })
      .def("same_genes", &Chromosome::same_genes)
      .def("__eq__", [](const Chromosome& a, const Chromosome& b) { return a == b; })
      .def("__repr__", [](const Chromosome& c) { return describe(c); });

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("modality", &Dataset::modality)
      .def_readonly("num_classes", &Dataset::num_classes)
      .def_readonly("class_names", &Dataset::class_names)
      .def(
          "features",
          [](const Dataset& d, const std::string& part) -> FeatureMatrix {
            if (part == "train") return d.train.features;
            if (part == "validation") return d.validation.features;
            if (part == "test") return d.test.features;
            throw py::value_error("partition must be train, validation or test");
          },
          py::arg("partition"))
      .def(
          "labels",
          [](const Dataset& d, const std::string& part) {
            if (part == "train") return d.train.class_indices();
            if (part == "validation") return d.validation.class_indices();
            if (part == "test") return d.test.class_indices();
            throw py::value_error("partition must be train, validation or test");
          },
          py::arg("partition"))
      .def_property_readonly("sizes", [](const Dataset& d) {
        return py::make_tuple(d.train.size(), d.validation.size(), d.test.size());
      });

  m.def("fitness_score", &fitness_score, py::arg("val_error"), py::arg("n_params"),
        py::arg("alpha") = 1.0);
  m.def("diverged_score", &diverged_score, py::arg("alpha") = 1.0);
  m.def("surrogate_val_error", &nn::surrogate_val_error, py::arg("chromosome"));

  m.def(
      "validate",
      [](const Chromosome& c, const TaskModality& modality, int num_classes, int max_size) {
        LayerBounds bounds;
        bounds.max_size = max_size;
        return validate(c, modality, num_classes, bounds).violations;
      },
      py::arg("chromosome"), py::arg("modality"), py::arg("num_classes"), py::arg("max_size") = 7);
  m.def(
      "count_parameters",
      [](const Chromosome& c, const TaskModality& modality, int num_classes) {
        return count_parameters(c, modality, num_classes, LayerBounds::unbounded());
      },
      py::arg("chromosome"), py::arg("modality"), py::arg("num_classes"));
  m.def(
      "random_chromosome",
      [](int size, const TaskModality& modality, int num_classes, std::uint64_t seed,
         int max_size) {
        LayerBounds bounds;
        bounds.max_size = max_size;
        Rng rng(seed);
        return random_chromosome(size, modality, num_classes, bounds, rng);
      },
      py::arg("size"), py::arg("modality"), py::arg("num_classes"), py::arg("seed"),
      py::arg("max_size") = 7);
  m.def(
      "mutate",
      [](const Chromosome& parent, const TaskModality& modality, int num_classes,
         std::uint64_t seed, const py::dict& config) {
        const auto c = config_from(config);
        Rng rng(seed);
        return mutate(parent, c.evolution, modality, num_classes, rng);
      },
      py::arg("parent"), py::arg("modality"), py::arg("num_classes"), py::arg("seed"),
      py::arg("config") = py::dict());

  m.def(
      "load_dataset",
      [](const std::string& descriptor) {
        py::gil_scoped_release release;
        return cli::load_dataset(std::string_view(descriptor));
      },
      py::arg("descriptor"));

  m.def(
      "evaluate",
      [](Chromosome& c, const Dataset& d, int epochs, double alpha, const std::string& evaluator,
         std::uint64_t seed, const py::dict& config) {
        const auto cfg = config_from(config);
        const auto ev = evaluator_from(evaluator, cfg);
        FitnessRecord record;
        {
          py::gil_scoped_release release;
          record = evaluate_or_penalize(c, d, epochs, alpha, *ev, seed);
        }
        return fitness_dict(record);
      },
      py::arg("chromosome"), py::arg("dataset"), py::arg("epochs"), py::arg("alpha") = 1.0,
      py::arg("evaluator") = "surrogate", py::arg("seed") = 0, py::arg("config") = py::dict(),
      "Trains and scores the chromosome in place, returning its fitness record.");

  m.def(
      "produce_offspring",
      [](const Chromosome& parent, const Dataset& d, int epochs, std::uint64_t seed,
         const std::string& evaluator, const py::dict& config) {
        const auto cfg = config_from(config);
        const auto ev = evaluator_from(evaluator, cfg);
        py::gil_scoped_release release;
        Rng rng(seed);
        return produce_offspring(parent, cfg.evolution, d, *ev, epochs, rng);
      },
      py::arg("parent"), py::arg("dataset"), py::arg("epochs"), py::arg("seed"),
      py::arg("evaluator") = "surrogate", py::arg("config") = py::dict());

  m.def(
      "tournament_select",
      [](const std::vector<Chromosome>& population, int tournament_size, std::uint64_t seed) {
        Rng rng(seed);
        const Chromosome& w = tournament_select(population, tournament_size, rng);
        return static_cast<std::size_t>(&w - population.data());
      },
      py::arg("population"), py::arg("tournament_size"), py::arg("seed"),
      "Index of the tournament winner.");

  m.def(
      "schedule",
      [](const py::dict& config) {
        const auto c = config_from(config).evolution;
        std::vector<std::pair<int, int>> out;
        for (int g = 0; g <= c.generation_max; ++g)
          out.emplace_back(scheduled_epochs(c, g), scheduled_population(c, g));
        return out;
      },
      py::arg("config") = py::dict(), "(epochs, population) per generation.");

  m.def("config_keys", &cli::config_keys);

  m.def(
      "run",
      [](const py::dict& config, bool verbose) {
        cli::RunConfig c = config_from(config);
        cli::check_config(c);
        cli::RunSummary summary;
        std::ostringstream sink;
        {
          py::gil_scoped_release release;
          summary = cli::run(c, verbose ? &sink : nullptr);
        }
        if (verbose) py::print(sink.str(), py::arg("end") = "");
        py::dict out;
        out["best"] = summary.result.best;
        out["test_accuracy"] = summary.annotation.test_accuracy;
        py::list history;
        for (const auto& s : summary.result.history) history.append(stats_dict(s));
        out["history"] = history;
        out["output_dir"] = summary.output_dir;
        return out;
      },
      py::arg("config"), py::arg("verbose") = false,
      "Runs a full search. `config` maps config-file keys to values; results are also written "
      "to output_dir.");

  m.def(
      "report",
      [](const std::filesystem::path& document, const std::string& dataset,
         std::optional<int> epochs, std::optional<std::uint64_t> seed) {
        std::ifstream in(document, std::ios::binary);
        if (!in) throw DataError("cannot open " + document.string());
        std::stringstream text;
        text << in.rdbuf();
        const auto doc = deserialize_document(text.str(), LayerBounds::unbounded());
        cli::ReportOptions options;
        options.epochs = epochs;
        options.seed = seed;
        cli::ReportResult r;
        {
          py::gil_scoped_release release;
          r = cli::report(doc, cli::load_dataset(std::string_view(dataset)), options);
        }
        py::dict out;
        out["test_accuracy"] = r.test_accuracy;
        out["n_params"] = r.n_params;
        out["epochs"] = r.epochs;
        out["seed"] = r.seed;
        out["evaluator"] = std::string(cli::to_string(r.evaluator));
        return out;
      },
      py::arg("document"), py::arg("dataset"), py::arg("epochs") = py::none(),
      py::arg("seed") = py::none());

  m.def(
      "synth",
      [](const std::string& kind, const std::filesystem::path& out_dir, std::uint64_t seed) {
        if (kind != "image" && kind != "sentiment")
          throw py::value_error("kind must be image or sentiment");
        cli::synth(kind == "image" ? cli::SynthKind::image : cli::SynthKind::sentiment, out_dir,
                   seed);
      },
      py::arg("kind"), py::arg("out_dir"), py::arg("seed") = 0);
}
