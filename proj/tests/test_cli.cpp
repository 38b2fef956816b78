#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "archevo/cli/config.hpp"
#include "archevo/cli/runner.hpp"
#include "archevo/errors.hpp"
#include "archevo/nn/surrogate.hpp"

using namespace archevo;
using namespace archevo::cli;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("archevo_test_cli_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

template <typename F>
std::string config_key(F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<ok>";
}

const char* kSmallImageDataset = "synth-image:train=60,validation=30,test=30";

RunConfig surrogate_config(const std::filesystem::path& out, int generation_max = 10) {
  RunConfig c = parse_config("seed = 3\ndataset = synth-image\nevaluator = surrogate\n");
  c.evolution.generation_max = generation_max;
  c.output_dir = out;
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// config parsing

TEST(ParseConfig, DefaultsWhenOnlyRequiredKeysGiven) {
  const RunConfig c = parse_config("seed = 5\ndataset = synth-image\n");
  EvolutionConfig expected;
  expected.seed = 5;
  EXPECT_EQ(c.evolution, expected);
  EXPECT_EQ(c.evolution.generation_max, 10);
  EXPECT_EQ(c.evolution.population_size, 100);
  EXPECT_EQ(c.evolution.tournament_size, 7);
  EXPECT_EQ(c.evaluator, EvaluatorKind::micro_nn);
  EXPECT_EQ(c.dataset, "synth-image");
  EXPECT_EQ(c.hyper.batch_size, nn::TrainingHyper{}.batch_size);
}

TEST(ParseConfig, CommentsBlankLinesAndWhitespace) {
  const RunConfig c = parse_config(
      "# run settings\n\n  seed=9   # trailing comment\n"
      "dataset = synth-sentiment:train=40\n"
      "population_size = 30\ntournament_size = 3\npopulation_floor = 5\n"
      "learning_rate_min = 1e-4\nbatch_size = 32\nevaluator = surrogate\n"
      "output_dir = /tmp/x y\n");
  EXPECT_EQ(c.evolution.seed, 9u);
  EXPECT_EQ(c.dataset, "synth-sentiment:train=40");
  EXPECT_EQ(c.evolution.population_size, 30);
  EXPECT_EQ(c.evolution.bounds.learning_rate.min, 1e-4);
  EXPECT_EQ(c.hyper.batch_size, 32);
  EXPECT_EQ(c.evaluator, EvaluatorKind::surrogate);
  EXPECT_EQ(c.output_dir, "/tmp/x y");
}

TEST(ParseConfig, DocumentedKeySet) {
  std::vector<std::string> keys = config_keys();
  std::sort(keys.begin(), keys.end());
  std::vector<std::string> expected{
      "adam_beta1", "adam_beta2", "adam_epsilon", "alpha", "batch_size",
      "conv_kernel_max", "conv_kernel_min", "dataset", "dense_units_max", "dense_units_min",
      "embedding_dim_max", "embedding_dim_min", "epochs_start", "evaluator", "filters_max",
      "filters_min", "generation_max", "learning_rate_max", "learning_rate_min", "max_size",
      "output_dir", "pool_kernel_max", "pool_kernel_min", "population_decrement",
      "population_floor", "population_size", "prob_clamp", "seed", "tournament_size",
      "weight_init_mean", "weight_init_std", "workers"};
  EXPECT_EQ(keys, expected);
  for (const auto& key : keys) {
    if (key == "dataset" || key == "output_dir") continue;  // free text
    RunConfig c;
    EXPECT_EQ(config_key([&] { set_config_value(c, key, "not-a-number"); }), key);
  }
}

TEST(ParseConfig, TournamentSizeZeroRejected) {
  EXPECT_EQ(config_key([] { parse_config("seed = 1\ndataset = synth-image\ntournament_size = 0\n"); }),
            "tournament_size");
}

TEST(ParseConfig, UnknownKeyNamed) {
  try {
    parse_config("seed = 1\ndataset = synth-image\npopulaton_size = 50\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "populaton_size");
    EXPECT_NE(std::string(e.what()).find("populaton_size"), std::string::npos);
  }
}

TEST(ParseConfig, TypeMismatchNamed) {
  EXPECT_EQ(config_key([] { parse_config("seed = 1\ndataset = synth-image\ngeneration_max = ten\n"); }),
            "generation_max");
  EXPECT_EQ(config_key([] { parse_config("seed = 1\ndataset = synth-image\nalpha = 1x\n"); }),
            "alpha");
  EXPECT_EQ(config_key([] { parse_config("seed = -1\ndataset = synth-image\n"); }), "seed");
  EXPECT_EQ(config_key([] { parse_config("seed = 1\ndataset = synth-image\nevaluator = gpu\n"); }),
            "evaluator");
}

TEST(ParseConfig, MissingSeedOrDataset) {
  EXPECT_EQ(config_key([] { parse_config("dataset = synth-image\n"); }), "seed");
  EXPECT_EQ(config_key([] { parse_config("seed = 1\n"); }), "dataset");
  EXPECT_EQ(config_key([] { parse_config("seed = 1\ndataset = image-csv:dir=/nonexistent\n"); }),
            "dataset");
}

TEST(ParseConfig, MalformedLine) {
  EXPECT_THROW(parse_config("seed 1\n"), ConfigError);
}

TEST(ParseConfig, OverridesApplyLast) {
  const RunConfig c =
      parse_config("seed = 1\ndataset = synth-image\n", {{"seed", "77"}, {"generation_max", "2"}});
  EXPECT_EQ(c.evolution.seed, 77u);
  EXPECT_EQ(c.evolution.generation_max, 2);
  EXPECT_EQ(parse_config("dataset = synth-image\n", {{"seed", "4"}}).evolution.seed, 4u);
  EXPECT_EQ(config_key([] { parse_config("seed = 1\ndataset = synth-image\n", {{"bogus", "1"}}); }),
            "bogus");
}

TEST(ParseConfig, TrainingHyperChecked) {
  EXPECT_EQ(config_key([] { parse_config("seed = 1\ndataset = synth-image\nbatch_size = 0\n"); }),
            "batch_size");
}

TEST(ParseConfig, LoadFromFile) {
  const auto dir = temp_dir("load");
  std::ofstream(dir / "run.cfg") << "seed = 2\ndataset = synth-image\n";
  EXPECT_EQ(load_config(dir / "run.cfg").evolution.seed, 2u);
  EXPECT_THROW(load_config(dir / "missing.cfg"), ConfigError);
}

// ---------------------------------------------------------------------------
// dataset descriptors

TEST(DatasetSpec, Parses) {
  const auto s = parse_dataset_spec(" synth-image : train=10, noise_std=0.5 ");
  EXPECT_EQ(s.kind, "synth-image");
  EXPECT_EQ(s.options, (std::map<std::string, std::string>{{"train", "10"}, {"noise_std", "0.5"}}));
  EXPECT_TRUE(parse_dataset_spec("text-tsv").options.empty());
}

TEST(DatasetSpec, Rejections) {
  EXPECT_THROW(parse_dataset_spec("mnist"), ConfigError);
  EXPECT_THROW(parse_dataset_spec("synth-image:train"), ConfigError);
  EXPECT_THROW(parse_dataset_spec("synth-image:train=1,train=2"), ConfigError);
  EXPECT_THROW(load_dataset("synth-image:colour=red"), ConfigError);
  EXPECT_THROW(load_dataset("synth-image:train=many"), ConfigError);
  EXPECT_THROW(load_dataset("image-csv"), ConfigError);
}

TEST(DatasetSpec, SyntheticOptionsApply) {
  const Dataset d = load_dataset("synth-image:train=30,validation=9,test=6,classes=4,height=6,width=5");
  EXPECT_EQ(d.train.size(), 30u);
  EXPECT_EQ(d.validation.size(), 9u);
  EXPECT_EQ(d.test.size(), 6u);
  EXPECT_EQ(d.num_classes, 4);
  EXPECT_EQ(d.modality, TaskModality::image2d(6, 5, 1));
  const Dataset t = load_dataset("synth-sentiment:train=40,validation=10,test=10,vocab_size=50,max_length=12");
  EXPECT_EQ(t.modality, TaskModality::sequence(12, 51));
}

TEST(DatasetSpec, SynthFilesLoadBack) {
  const auto img = temp_dir("synth_image");
  synth(SynthKind::image, img, 4);
  for (const char* f : {"train.csv", "validation.csv", "test.csv"})
    EXPECT_TRUE(std::filesystem::exists(img / f)) << f;
  const Dataset d = load_dataset("image-csv:dir=" + img.string() + ",height=8,width=8,classes=3");
  SynthImageSpec spec;
  spec.seed = 4;
  const Dataset direct = synth_image_dataset(spec);
  EXPECT_EQ(d.train.size(), direct.train.size());
  EXPECT_EQ(d.test.labels, direct.test.labels);
  EXPECT_LE((d.test.features - direct.test.features).cwiseAbs().maxCoeff(), 0.5f / 255 + 1e-6f);

  const auto txt = temp_dir("synth_text");
  synth(SynthKind::sentiment, txt, 4);
  const Dataset t = load_dataset("text-tsv:dir=" + txt.string() + ",max_length=32,classes=2");
  EXPECT_EQ(t.train.size(), 2000u);
  EXPECT_EQ(t.validation.size(), 400u);
  EXPECT_EQ(t.test.size(), 400u);
  EXPECT_EQ(t.modality, TaskModality::sequence(32, 1001));
}

TEST(DatasetSpec, MissingValidationFileSplitsTrain) {
  const auto dir = temp_dir("split");
  synth(SynthKind::image, dir, 1);
  std::filesystem::remove(dir / "validation.csv");
  const Dataset d = load_dataset("image-csv:dir=" + dir.string() +
                                 ",height=8,width=8,classes=3,validation_fraction=0.2");
  EXPECT_EQ(d.train.size(), 800u);
  EXPECT_EQ(d.validation.size(), 200u);
}

// ---------------------------------------------------------------------------
// output formats

TEST(Formats, RealsRoundTripShortest) {
  EXPECT_EQ(format_real(1.099), "1.099");
  EXPECT_EQ(format_real(0.1), "0.1");
  EXPECT_EQ(format_real(3.0), "3");
  for (double v : {1.0 / 3, 2.0 / 7, 1e-300, 123456.789})
    EXPECT_EQ(std::stod(format_real(v)), v);
}

TEST(Formats, StatsRowColumns) {
  GenerationStats s;
  s.generation = 4;
  s.fitness_mean = 1.25;
  s.fitness_p5 = 1.0;
  s.fitness_p95 = 1.5;
  s.lr_mean = 0.001;
  s.lr_p5 = 0.0005;
  s.lr_p95 = 0.002;
  EXPECT_EQ(stats_row(s), "4,1.25,1,1.5,0.001,5e-04,0.002");
  EXPECT_STREQ(kStatsHeader, "generation,fitness_mean,fitness_p5,fitness_p95,lr_mean,lr_p5,lr_p95");
}

TEST(Formats, EventLineCarriesEveryStatistic) {
  GenerationStats s;
  s.generation = 2;
  s.epochs = 5;
  s.population_size = 80;
  s.best_n_params = 1234;
  Chromosome best;
  best.learning_rate = 0.01;
  best.layers = {Conv2D{10, 3, Activation::relu}, Dense{3, Activation::softmax}};
  const auto j = nlohmann::json::parse(event_line(s, best));
  for (const char* key : {"generation", "epochs", "population_size", "fitness_mean", "fitness_p5",
                          "fitness_p95", "fitness_best", "lr_mean", "lr_p5", "lr_p95",
                          "best_val_accuracy", "best_n_params", "best"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["population_size"], 80);
  EXPECT_EQ(deserialize(j["best"].dump()), best);
}

// ---------------------------------------------------------------------------
// run

TEST(Run, SurrogateDefaultsWriteElevenRecords) {
  const auto dir = temp_dir("run_defaults");
  const RunSummary s = run(surrogate_config(dir));
  const auto events = lines_of(read_file(dir / kEventsFile));
  ASSERT_EQ(events.size(), 11u);
  const int expected_pop[] = {100, 90, 80, 70, 60, 50, 40, 30, 20, 10, 10};
  for (int g = 0; g <= 10; ++g) {
    const auto j = nlohmann::json::parse(events[static_cast<std::size_t>(g)]);
    EXPECT_EQ(j["generation"], g);
    EXPECT_EQ(j["epochs"], 3 + g);
    EXPECT_EQ(j["population_size"], expected_pop[g]);
  }
  const auto stats = lines_of(read_file(dir / kStatsFile));
  ASSERT_EQ(stats.size(), 12u);
  EXPECT_EQ(stats[0], kStatsHeader);
  for (std::size_t i = 0; i < s.result.history.size(); ++i)
    EXPECT_EQ(stats[i + 1], stats_row(s.result.history[i]));

  const auto doc = deserialize_document(read_file(dir / kBestFile));
  EXPECT_EQ(doc.chromosome, s.result.best);
  ASSERT_TRUE(doc.run);
  EXPECT_EQ(doc.run->epochs, 13);
  EXPECT_EQ(doc.run->seed, 3u);
  EXPECT_EQ(doc.run->evaluator, "surrogate");
  EXPECT_DOUBLE_EQ(doc.run->test_accuracy, 1.0 - s.result.best.fitness->val_error);
  EXPECT_LE(s.result.history.back().fitness_mean, s.result.history.front().fitness_mean);
}

TEST(Run, RepeatIsByteIdentical) {
  const auto a = temp_dir("repeat_a"), b = temp_dir("repeat_b");
  run(surrogate_config(a));
  run(surrogate_config(b));
  for (const char* f : {kStatsFile, kBestFile, kEventsFile})
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
}

TEST(Run, ZeroGenerationsSingleRecord) {
  const auto dir = temp_dir("run_zero");
  const RunSummary s = run(surrogate_config(dir, 0));
  EXPECT_EQ(lines_of(read_file(dir / kEventsFile)).size(), 1u);
  EXPECT_EQ(lines_of(read_file(dir / kStatsFile)).size(), 2u);
  EXPECT_EQ(s.annotation.epochs, 3);
  const auto pop = s.result.population;
  ASSERT_EQ(pop.size(), 100u);
  for (const auto& m : pop) EXPECT_LE(s.result.best.fitness->score, m.fitness->score);
}

TEST(Run, MicroNNSmallRunWritesAccuracy) {
  const auto dir = temp_dir("run_micro");
  RunConfig c = parse_config(std::string("seed = 1\ndataset = ") + kSmallImageDataset +
                             "\npopulation_size = 4\ntournament_size = 2\npopulation_floor = 2\n"
                             "population_decrement = 1\ngeneration_max = 1\nepochs_start = 1\n"
                             "batch_size = 16\nmax_size = 2\n");
  c.output_dir = dir;
  std::ostringstream log;
  const RunSummary s = run(c, &log);
  EXPECT_NE(log.str().find("generation 1"), std::string::npos);
  EXPECT_GE(s.annotation.test_accuracy, 0.0);
  EXPECT_LE(s.annotation.test_accuracy, 1.0);
  EXPECT_EQ(s.annotation.batch_size, 16);
  EXPECT_EQ(s.annotation.evaluator, "micro_nn");
  // the recorded accuracy is reproducible from the file alone
  const auto doc = deserialize_document(read_file(dir / kBestFile));
  const auto r = report(doc, load_dataset(kSmallImageDataset));
  EXPECT_EQ(r.test_accuracy, s.annotation.test_accuracy);
  EXPECT_EQ(r.epochs, 2);
}

TEST(Run, UnwritableOutputDirectoryFails) {
  RunConfig c = surrogate_config("/proc/archevo_cannot_write", 1);
  EXPECT_ANY_THROW(run(c));
}

// ---------------------------------------------------------------------------
// report

TEST(Report, NoiselessDataGivesPerfectAccuracy) {
  const Dataset d = load_dataset("synth-image:noise_std=0,train=300,validation=60,test=60");
  Chromosome c;
  c.learning_rate = 0.003;
  c.layers = {Conv2D{10, 3, Activation::relu}, MaxPool2D{2}, Dense{3, Activation::softmax}};
  ReportOptions o;
  o.epochs = 3;
  o.seed = 1;
  o.batch_size = 32;
  const auto r = report(ChromosomeDocument{c, std::nullopt}, d, o);
  EXPECT_EQ(r.test_accuracy, 1.0);
  EXPECT_EQ(r.n_params, count_parameters(c, d.modality, 3));
  EXPECT_EQ(r.epochs, 3);
  EXPECT_EQ(r.evaluator, EvaluatorKind::micro_nn);
}

TEST(Report, DefaultsFromRunBlock) {
  const Dataset d = load_dataset(kSmallImageDataset);
  Chromosome c;
  c.learning_rate = 0.003;
  c.layers = {Conv2D{10, 3, Activation::relu}, Dense{3, Activation::softmax}};
  const auto r = report(ChromosomeDocument{c, RunAnnotation{0.5, 9, 4, "surrogate", 64}}, d);
  EXPECT_EQ(r.epochs, 4);
  EXPECT_EQ(r.seed, 9u);
  EXPECT_EQ(r.evaluator, EvaluatorKind::surrogate);
  EXPECT_DOUBLE_EQ(r.test_accuracy, 1.0 - nn::surrogate_val_error(c));
  const auto plain = report(ChromosomeDocument{c, std::nullopt}, d, {std::nullopt, std::nullopt,
                                                                    EvaluatorKind::surrogate, {}});
  EXPECT_EQ(plain.epochs, 13);
  EXPECT_EQ(plain.seed, 0u);
}

TEST(Report, ModalityMismatchRejected) {
  const Dataset text = load_dataset("synth-sentiment:train=20,validation=4,test=4,max_length=8");
  Chromosome c;
  c.learning_rate = 0.003;
  c.layers = {Conv2D{10, 3, Activation::relu}, Dense{3, Activation::softmax}};
  EXPECT_THROW(report(ChromosomeDocument{c, std::nullopt}, text), DataError);
  // right modality, wrong class count
  const Dataset img = load_dataset("synth-image:classes=4,train=20,validation=4,test=4");
  EXPECT_THROW(report(ChromosomeDocument{c, std::nullopt}, img), DataError);
}
