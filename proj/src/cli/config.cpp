#include "archevo/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "archevo/errors.hpp"

namespace archevo::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value, const char* type_name) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (value.empty() || ec != std::errc{} || ptr != end)
    throw ConfigError(std::string(key), "expected " + std::string(type_name) + ", got '" +
                                            std::string(value) + "'");
  return out;
}

int parse_int(std::string_view key, std::string_view value) {
  return parse_number<int>(key, value, "an integer");
}
double parse_real(std::string_view key, std::string_view value) {
  return parse_number<double>(key, value, "a number");
}
std::uint64_t parse_u64(std::string_view key, std::string_view value) {
  return parse_number<std::uint64_t>(key, value, "a non-negative integer");
}

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view value)>;

Setter int_field(int EvolutionConfig::*field) {
  return [field](RunConfig& c, std::string_view k, std::string_view v) {
    c.evolution.*field = parse_int(k, v);
  };
}

Setter range_bound(IntRange LayerBounds::*range, int IntRange::*end) {
  return [range, end](RunConfig& c, std::string_view k, std::string_view v) {
    c.evolution.bounds.*range.*end = parse_int(k, v);
  };
}

Setter hyper_real(double nn::TrainingHyper::*field) {
  return [field](RunConfig& c, std::string_view k, std::string_view v) {
    c.hyper.*field = parse_real(k, v);
  };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"population_size", int_field(&EvolutionConfig::population_size)},
      {"generation_max", int_field(&EvolutionConfig::generation_max)},
      {"epochs_start", int_field(&EvolutionConfig::epochs_start)},
      {"tournament_size", int_field(&EvolutionConfig::tournament_size)},
      {"population_decrement", int_field(&EvolutionConfig::population_decrement)},
      {"population_floor", int_field(&EvolutionConfig::population_floor)},
      {"max_size", int_field(&EvolutionConfig::max_size)},
      {"workers", int_field(&EvolutionConfig::workers)},
      {"alpha",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.evolution.alpha = parse_real(k, v);
       }},
      {"seed",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.evolution.seed = parse_u64(k, v);
         c.has_seed = true;
       }},
      {"filters_min", range_bound(&LayerBounds::filters, &IntRange::min)},
      {"filters_max", range_bound(&LayerBounds::filters, &IntRange::max)},
      {"conv_kernel_min", range_bound(&LayerBounds::conv_kernel, &IntRange::min)},
      {"conv_kernel_max", range_bound(&LayerBounds::conv_kernel, &IntRange::max)},
      {"pool_kernel_min", range_bound(&LayerBounds::pool_kernel, &IntRange::min)},
      {"pool_kernel_max", range_bound(&LayerBounds::pool_kernel, &IntRange::max)},
      {"dense_units_min", range_bound(&LayerBounds::dense_units, &IntRange::min)},
      {"dense_units_max", range_bound(&LayerBounds::dense_units, &IntRange::max)},
      {"embedding_dim_min", range_bound(&LayerBounds::embedding_dim, &IntRange::min)},
      {"embedding_dim_max", range_bound(&LayerBounds::embedding_dim, &IntRange::max)},
      {"learning_rate_min",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.evolution.bounds.learning_rate.min = parse_real(k, v);
       }},
      {"learning_rate_max",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.evolution.bounds.learning_rate.max = parse_real(k, v);
       }},
      {"batch_size",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.hyper.batch_size = parse_int(k, v);
       }},
      {"weight_init_mean", hyper_real(&nn::TrainingHyper::weight_init_mean)},
      {"weight_init_std", hyper_real(&nn::TrainingHyper::weight_init_std)},
      {"adam_beta1", hyper_real(&nn::TrainingHyper::adam_beta1)},
      {"adam_beta2", hyper_real(&nn::TrainingHyper::adam_beta2)},
      {"adam_epsilon", hyper_real(&nn::TrainingHyper::adam_epsilon)},
      {"prob_clamp", hyper_real(&nn::TrainingHyper::prob_clamp)},
      {"dataset",
       [](RunConfig& c, std::string_view, std::string_view v) { c.dataset = std::string(v); }},
      {"evaluator",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         const auto kind = parse_evaluator_kind(v);
         if (!kind)
           throw ConfigError(std::string(k), "expected micro_nn or surrogate, got '" +
                                                 std::string(v) + "'");
         c.evaluator = *kind;
       }},
      {"output_dir",
       [](RunConfig& c, std::string_view, std::string_view v) { c.output_dir = std::string(v); }},
  };
  return table;
}

/// Typed access to descriptor options; every option must be consumed.
class Options {
 public:
  Options(const DatasetSpec& spec) : spec_(spec), remaining_(spec.options) {}

  int integer(const std::string& key, int fallback) {
    auto v = take(key);
    return v ? parse_int(field(key), *v) : fallback;
  }
  double real(const std::string& key, double fallback) {
    auto v = take(key);
    return v ? parse_real(field(key), *v) : fallback;
  }
  std::uint64_t u64(const std::string& key, std::uint64_t fallback) {
    auto v = take(key);
    return v ? parse_u64(field(key), *v) : fallback;
  }
  std::filesystem::path path(const std::string& key) {
    auto v = take(key);
    if (!v || v->empty()) throw ConfigError("dataset", spec_.kind + " requires " + key + "=<path>");
    return *v;
  }
  void done() const {
    if (!remaining_.empty())
      throw ConfigError("dataset", "unknown option '" + remaining_.begin()->first + "' for " +
                                       spec_.kind);
  }

 private:
  std::optional<std::string> take(const std::string& key) {
    auto it = remaining_.find(key);
    if (it == remaining_.end()) return std::nullopt;
    std::string v = it->second;
    remaining_.erase(it);
    return v;
  }
  std::string field(const std::string& key) const { return "dataset." + key; }

  const DatasetSpec& spec_;
  std::map<std::string, std::string> remaining_;
};

Dataset load_image_dir(Options& o) {
  const auto dir = o.path("dir");
  ImageCsvFormat f;
  f.height = o.integer("height", f.height);
  f.width = o.integer("width", f.width);
  f.channels = o.integer("channels", f.channels);
  f.num_classes = o.integer("classes", f.num_classes);
  f.pixel_scale = o.real("scale", f.pixel_scale);
  const double fraction = o.real("validation_fraction", 0.1);
  const std::uint64_t split_seed = o.u64("split_seed", 0);
  o.done();

  Dataset d;
  d.modality = TaskModality::image2d(f.height, f.width, f.channels);
  d.num_classes = f.num_classes;
  Partition train = load_image_csv(dir / "train.csv", f);
  if (std::filesystem::exists(dir / "validation.csv")) {
    d.train = std::move(train);
    d.validation = load_image_csv(dir / "validation.csv", f);
  } else {
    Rng rng(split_seed);
    std::tie(d.train, d.validation) = split(train, fraction, rng);
  }
  d.test = load_image_csv(dir / "test.csv", f);
  d.check();
  return d;
}

Dataset load_text_dir(Options& o) {
  const auto dir = o.path("dir");
  TextDatasetOptions opts;
  opts.vocab_size = o.integer("vocab_size", opts.vocab_size);
  opts.max_length = o.integer("max_length", opts.max_length);
  opts.validation_fraction = o.real("validation_fraction", opts.validation_fraction);
  opts.num_classes = o.integer("classes", opts.num_classes);
  const std::uint64_t split_seed = o.u64("split_seed", 0);
  o.done();

  const auto train = load_text_corpus(dir / "train.tsv");
  const auto test = load_text_corpus(dir / "test.tsv");
  if (std::filesystem::exists(dir / "validation.tsv")) {
    const auto validation = load_text_corpus(dir / "validation.tsv");
    return make_text_dataset(train, validation, test, opts);
  }
  Rng rng(split_seed);
  return make_text_dataset(train, test, opts, rng);
}

}  // namespace

std::string_view to_string(EvaluatorKind kind) noexcept {
  return kind == EvaluatorKind::surrogate ? "surrogate" : "micro_nn";
}

std::optional<EvaluatorKind> parse_evaluator_kind(std::string_view name) noexcept {
  if (name == "micro_nn") return EvaluatorKind::micro_nn;
  if (name == "surrogate") return EvaluatorKind::surrogate;
  return std::nullopt;
}

DatasetSpec parse_dataset_spec(std::string_view text) {
  text = trim(text);
  DatasetSpec spec;
  const auto colon = text.find(':');
  spec.kind = std::string(trim(text.substr(0, colon)));
  if (spec.kind != "synth-image" && spec.kind != "synth-sentiment" && spec.kind != "image-csv" &&
      spec.kind != "text-tsv")
    throw ConfigError("dataset", "unknown dataset kind '" + spec.kind +
                                     "' (expected synth-image, synth-sentiment, image-csv or "
                                     "text-tsv)");
  if (colon == std::string_view::npos) return spec;

  std::string_view rest = text.substr(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = trim(rest.substr(0, comma));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("dataset", "expected key=value, got '" + std::string(item) + "'");
    std::string key(trim(item.substr(0, eq)));
    if (!spec.options.emplace(key, std::string(trim(item.substr(eq + 1)))).second)
      throw ConfigError("dataset", "duplicate option '" + key + "'");
  }
  return spec;
}

Dataset load_dataset(const DatasetSpec& spec) {
  Options o(spec);
  if (spec.kind == "synth-image") {
    SynthImageSpec s;
    s.train = o.integer("train", s.train);
    s.validation = o.integer("validation", s.validation);
    s.test = o.integer("test", s.test);
    s.classes = o.integer("classes", s.classes);
    s.height = o.integer("height", s.height);
    s.width = o.integer("width", s.width);
    s.noise_std = o.real("noise_std", s.noise_std);
    s.seed = o.u64("seed", s.seed);
    o.done();
    return synth_image_dataset(s);
  }
  if (spec.kind == "synth-sentiment") {
    SynthSentimentSpec s;
    s.train = o.integer("train", s.train);
    s.validation = o.integer("validation", s.validation);
    s.test = o.integer("test", s.test);
    s.background_words = o.integer("background_words", s.background_words);
    s.min_words = o.integer("min_words", s.min_words);
    s.max_words = o.integer("max_words", s.max_words);
    s.label_noise = o.real("label_noise", s.label_noise);
    s.seed = o.u64("seed", s.seed);
    const int vocab_size = o.integer("vocab_size", 1000);
    const int max_length = o.integer("max_length", 32);
    o.done();
    return synth_sentiment_dataset(s, vocab_size, max_length);
  }
  if (spec.kind == "image-csv") return load_image_dir(o);
  return load_text_dir(o);
}

Dataset load_dataset(std::string_view text) { return load_dataset(parse_dataset_spec(text)); }

void check_dataset_paths(const DatasetSpec& spec) {
  if (spec.kind != "image-csv" && spec.kind != "text-tsv") return;
  const auto it = spec.options.find("dir");
  if (it == spec.options.end() || it->second.empty())
    throw ConfigError("dataset", spec.kind + " requires dir=<path>");
  const std::filesystem::path dir = it->second;
  const char* ext = spec.kind == "image-csv" ? ".csv" : ".tsv";
  for (const char* name : {"train", "test"}) {
    const auto p = dir / (std::string(name) + ext);
    if (!std::filesystem::exists(p)) throw ConfigError("dataset", "missing file " + p.string());
  }
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void set_config_value(RunConfig& config, std::string_view key, std::string_view value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError(std::string(key), "unknown key");
  it->second(config, key, trim(value));
}

RunConfig parse_config(std::string_view text, const Overrides& overrides) {
  RunConfig config;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("", "line " + std::to_string(line_no) + ": expected 'key = value'");
    set_config_value(config, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  for (const auto& [key, value] : overrides) set_config_value(config, key, value);
  check_config(config);
  return config;
}

RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

void check_config(const RunConfig& config) {
  if (!config.has_seed) throw ConfigError("seed", "required");
  if (config.dataset.empty()) throw ConfigError("dataset", "required");
  config.evolution.check();
  try {
    config.hyper.check();
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    throw ConfigError(what.substr(0, what.find(' ')), what);
  }
  check_dataset_paths(parse_dataset_spec(config.dataset));
}

}  // namespace archevo::cli
