#include <gtest/gtest.h>

#include "archevo/errors.hpp"
#include "archevo/serialize.hpp"

using namespace archevo;

namespace {

Chromosome sample() {
  Chromosome c;
  c.learning_rate = 0.0023;
  c.layers = {Embedding{120}, Conv1D{32, 3, Activation::relu}, MaxPool1D{2}, Dropout{0.75},
              Dense{20, Activation::relu}, Dense{2, Activation::sigmoid}};
  return c;
}

template <typename F>
std::string schema_field(F&& f) {
  try {
    f();
  } catch (const SchemaError& e) {
    return e.field();
  }
  return "<no SchemaError>";
}

}  // namespace

TEST(Serialize, RoundTripWithoutFitness) {
  const Chromosome c = sample();
  const Chromosome back = deserialize(serialize(c));
  EXPECT_EQ(back, c);
  EXPECT_FALSE(back.fitness);
}

TEST(Serialize, RoundTripWithFitnessAndRunBlock) {
  Chromosome c = sample();
  FitnessRecord f;
  f.val_error = 0.1;
  f.n_params = 1000;
  f.alpha = 1.0;
  f.score = 1.099;
  f.epochs_used = 5;
  c.fitness = f;
  const ChromosomeDocument doc{c, RunAnnotation{0.95, 42, 8, "surrogate", 64}};
  EXPECT_EQ(deserialize_document(serialize(doc)), doc);
}

TEST(Serialize, DivergedFlagSurvives) {
  Chromosome c = sample();
  FitnessRecord f;
  f.val_error = 1.0;
  f.n_params = 10;
  f.score = 3.0;
  f.diverged = true;
  c.fitness = f;
  EXPECT_TRUE(deserialize(serialize(c)).fitness->diverged);
}

TEST(Serialize, RandomChromosomesRoundTrip) {
  Rng rng(11);
  const auto image = TaskModality::image2d(8, 8, 1);
  const auto text = TaskModality::sequence(32, 1001);
  for (int i = 0; i < 1000; ++i) {
    const bool t = i % 2 == 0;
    Chromosome c = random_chromosome(1 + i % 7, t ? text : image, t ? 2 : 3, {}, rng);
    if (i % 3 == 0) {
      FitnessRecord f;
      f.val_error = std::uniform_real_distribution<double>(0, 1)(rng);
      f.n_params = 1 + static_cast<std::int64_t>(rng() % 1000000);
      f.score = f.val_error + (1.0 - 1.0 / static_cast<double>(f.n_params));
      f.epochs_used = 3;
      c.fitness = f;
    }
    ASSERT_EQ(deserialize(serialize(c)), c) << serialize(c);
  }
}

TEST(Serialize, FieldNamesAreExact) {
  const std::string text = serialize(sample());
  for (const char* key : {"\"learning_rate\"", "\"layers\"", "\"type\"", "\"embedding\"",
                          "\"output_dim\"", "\"conv1d\"", "\"filters\"", "\"kernel\"",
                          "\"activation\"", "\"maxpool1d\"", "\"dropout\"", "\"keep_prob\"",
                          "\"dense\"", "\"units\""})
    EXPECT_NE(text.find(key), std::string::npos) << key;
}

TEST(Deserialize, FiltersOutOfBoundsNamesField) {
  const std::string doc = R"({"learning_rate": 0.001, "layers": [
      {"type": "conv2d", "filters": 200, "kernel": 3, "activation": "relu"},
      {"type": "dense", "units": 3, "activation": "softmax"}]})";
  try {
    deserialize(doc);
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.field(), "layers[0].filters");
    EXPECT_NE(std::string(e.what()).find("out of [10,100]"), std::string::npos) << e.what();
  }
}

TEST(Deserialize, EmptyDocumentIsParseError) {
  EXPECT_THROW(deserialize(""), ParseError);
  EXPECT_THROW(deserialize("   "), ParseError);
}

TEST(Deserialize, ParseErrorCarriesPosition) {
  try {
    deserialize(R"({"learning_rate": 0.001, "layers": [}")");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_GT(e.position(), 30u);
  }
}

TEST(Deserialize, SchemaViolationsNameTheirField) {
  EXPECT_EQ(schema_field([] { deserialize(R"({"layers": []})"); }), "learning_rate");
  EXPECT_EQ(schema_field([] { deserialize(R"({"learning_rate": 0.001, "layers": []})"); }),
            "layers");
  EXPECT_EQ(schema_field([] {
              deserialize(R"({"learning_rate": 0.001, "extra": 1,
                              "layers": [{"type": "dense", "units": 3, "activation": "linear"}]})");
            }),
            "extra");
  EXPECT_EQ(schema_field([] {
              deserialize(R"({"learning_rate": 0.001,
                              "layers": [{"type": "lstm"}, {"type": "dense", "units": 3, "activation": "linear"}]})");
            }),
            "layers[0].type");
  EXPECT_EQ(schema_field([] {
              deserialize(R"({"learning_rate": 0.001,
                              "layers": [{"type": "conv2d", "filters": 10, "kernel": 3, "activation": "softmax"},
                                         {"type": "dense", "units": 3, "activation": "linear"}]})");
            }),
            "layers[0].activation");
  EXPECT_EQ(schema_field([] {
              deserialize(R"({"learning_rate": 0.001,
                              "layers": [{"type": "conv2d", "filters": 10, "kernel": 3, "activation": "relu"}]})");
            }),
            "layers");
  EXPECT_EQ(schema_field([] {
              deserialize(R"({"learning_rate": 0.001,
                              "layers": [{"type": "dropout", "keep_prob": 1.0},
                                         {"type": "dense", "units": 3, "activation": "linear"}]})");
            }),
            "layers[0].keep_prob");
  EXPECT_EQ(schema_field([] { deserialize(R"({"learning_rate": 5.0,
                              "layers": [{"type": "dense", "units": 3, "activation": "linear"}]})"); }),
            "learning_rate");
  EXPECT_EQ(schema_field([] {
              deserialize(R"({"learning_rate": 0.001,
                              "layers": [{"type": "dense", "units": 3, "activation": "linear"}],
                              "fitness": {"val_error": 0.1, "score": 1.0}})");
            }),
            "fitness.n_params");
}

TEST(Deserialize, CustomBoundsApply) {
  const std::string doc = R"({"learning_rate": 0.001, "layers": [
      {"type": "conv2d", "filters": 200, "kernel": 3, "activation": "relu"},
      {"type": "dense", "units": 3, "activation": "softmax"}]})";
  EXPECT_NO_THROW(deserialize(doc, LayerBounds::unbounded()));
}
