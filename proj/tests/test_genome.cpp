#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "archevo/errors.hpp"
#include "archevo/genome.hpp"
#include "archevo/nn/network.hpp"

using namespace archevo;

namespace {

const TaskModality kImage = TaskModality::image2d(8, 8, 1);
const TaskModality kText = TaskModality::sequence(100, 1000);

Chromosome make(std::vector<Layer> layers, double lr = 1e-3) {
  Chromosome c;
  c.learning_rate = lr;
  c.layers = std::move(layers);
  return c;
}

bool mentions(const ValidityReport& r, const std::string& needle) {
  return std::any_of(r.violations.begin(), r.violations.end(),
                     [&](const std::string& v) { return v.find(needle) != std::string::npos; });
}

/// Bounds check written against the published limits directly.
bool within_published_bounds(const Layer& l, bool terminal) {
  if (auto* c = std::get_if<Conv1D>(&l))
    return c->filters >= 10 && c->filters <= 100 && c->kernel >= 1 && c->kernel <= 6;
  if (auto* c = std::get_if<Conv2D>(&l))
    return c->filters >= 10 && c->filters <= 100 && c->kernel >= 1 && c->kernel <= 6;
  if (auto* p = std::get_if<MaxPool1D>(&l)) return p->kernel >= 1 && p->kernel <= 6;
  if (auto* p = std::get_if<MaxPool2D>(&l)) return p->kernel >= 1 && p->kernel <= 6;
  if (auto* d = std::get_if<Dense>(&l)) return terminal || (d->units >= 10 && d->units <= 100);
  if (auto* d = std::get_if<Dropout>(&l)) return d->keep_prob > 0 && d->keep_prob < 1;
  if (auto* e = std::get_if<Embedding>(&l)) return e->output_dim >= 100 && e->output_dim <= 300;
  return false;
}

}  // namespace

TEST(Modality, RejectsNonPositiveExtents) {
  EXPECT_THROW(TaskModality::image2d(0, 8, 1), std::invalid_argument);
  EXPECT_THROW(TaskModality::image2d(8, 8, 0), std::invalid_argument);
  EXPECT_THROW(TaskModality::sequence(0, 10), std::invalid_argument);
  EXPECT_THROW(TaskModality::sequence(10, 0), std::invalid_argument);
}

TEST(Activation, NamesRoundTrip) {
  for (auto a : {Activation::linear, Activation::leaky_relu, Activation::prelu, Activation::relu,
                 Activation::sigmoid, Activation::softmax})
    EXPECT_EQ(parse_activation(to_string(a)), a);
  EXPECT_FALSE(parse_activation("tanh"));
}

TEST(Activation, LegalSets) {
  EXPECT_TRUE(is_conv_activation(Activation::prelu));
  EXPECT_FALSE(is_conv_activation(Activation::sigmoid));
  EXPECT_TRUE(is_dense_activation(Activation::softmax));
  EXPECT_FALSE(is_dense_activation(Activation::prelu));
  EXPECT_TRUE(is_terminal_activation(Activation::linear));
  EXPECT_FALSE(is_terminal_activation(Activation::relu));
}

TEST(Bounds, DefaultsMatchPublishedList) {
  const LayerBounds b;
  EXPECT_EQ(b.filters, (IntRange{10, 100}));
  EXPECT_EQ(b.conv_kernel, (IntRange{1, 6}));
  EXPECT_EQ(b.pool_kernel, (IntRange{1, 6}));
  EXPECT_EQ(b.dense_units, (IntRange{10, 100}));
  EXPECT_EQ(b.embedding_dim, (IntRange{100, 300}));
  EXPECT_EQ(b.max_size, 7);
  EXPECT_NO_THROW(b.check());
}

TEST(Bounds, CheckRejectsEmptyRanges) {
  LayerBounds b;
  b.filters = {50, 40};
  EXPECT_THROW(b.check(), std::invalid_argument);
  b = {};
  b.max_size = 0;
  EXPECT_THROW(b.check(), std::invalid_argument);
  b = {};
  b.learning_rate = {0.0, 0.1};
  EXPECT_THROW(b.check(), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// infer_shape

TEST(InferShape, MaxPool2DFloorsSpatialExtents) {
  EXPECT_EQ(infer_shape(MaxPool2D{2}, GridShape{28, 28, 5}), Shape(GridShape{14, 14, 5}));
  EXPECT_EQ(infer_shape(MaxPool2D{3}, GridShape{8, 8, 2}), Shape(GridShape{2, 2, 2}));
}

TEST(InferShape, ConvKeepsSpatialExtents) {
  EXPECT_EQ(infer_shape(Conv2D{32, 3, Activation::relu}, GridShape{8, 8, 1}),
            Shape(GridShape{8, 8, 32}));
  EXPECT_EQ(infer_shape(Conv1D{12, 5, Activation::relu}, SeqShape{100, 120}),
            Shape(SeqShape{100, 12}));
}

TEST(InferShape, EmbeddingSetsChannels) {
  EXPECT_EQ(infer_shape(Embedding{120}, SeqShape{100, 1}), Shape(SeqShape{100, 120}));
}

TEST(InferShape, DenseFlattensAndDropoutIsIdentity) {
  EXPECT_EQ(infer_shape(Dense{10, Activation::relu}, GridShape{4, 4, 3}), Shape(FlatShape{10}));
  EXPECT_EQ(infer_shape(Dropout{0.5}, GridShape{4, 4, 3}), Shape(GridShape{4, 4, 3}));
  EXPECT_EQ(flat_size(GridShape{4, 4, 3}), 48);
}

TEST(InferShape, InapplicableLayerThrows) {
  EXPECT_THROW(infer_shape(Conv2D{10, 3, Activation::relu}, FlatShape{10}), ShapeError);
  EXPECT_THROW(infer_shape(Conv2D{10, 3, Activation::relu}, SeqShape{10, 4}), ShapeError);
  EXPECT_THROW(infer_shape(MaxPool2D{3}, GridShape{2, 2, 1}), ShapeError);
  EXPECT_THROW(infer_shape(Embedding{100}, GridShape{2, 2, 1}), ShapeError);
}

// ---------------------------------------------------------------------------
// validate

TEST(Validate, MinimalImageNetworkIsValid) {
  const auto c = make({Conv2D{10, 3, Activation::relu}, Dense{3, Activation::softmax}});
  EXPECT_TRUE(validate(c, kImage, 3).ok());
}

TEST(Validate, Conv2DOnSequenceRejected) {
  const auto c = make({Conv2D{10, 3, Activation::relu}, Dense{2, Activation::softmax}});
  const auto r = validate(c, kText, 2);
  EXPECT_FALSE(r.ok());
  EXPECT_TRUE(mentions(r, "2D layer on sequence modality"));
}

TEST(Validate, PoolingCollapseRejected) {
  const auto c = make({MaxPool2D{6}, MaxPool2D{6}, MaxPool2D{6}, Dense{3, Activation::linear}});
  const auto r = validate(c, kImage, 3);
  EXPECT_FALSE(r.ok());
  EXPECT_TRUE(mentions(r, "spatial extent < 1"));
}

TEST(Validate, EmbeddingPlacement) {
  EXPECT_TRUE(mentions(
      validate(make({Embedding{100}, Dense{3, Activation::linear}}), kImage, 3),
      "Embedding on image modality"));
  EXPECT_TRUE(mentions(validate(make({Embedding{100}, Embedding{100}, Dense{2, Activation::linear}}),
                                kText, 2),
                       "Embedding only allowed at position 0"));
  EXPECT_TRUE(mentions(validate(make({Conv1D{10, 3, Activation::relu}, Dense{2, Activation::linear}}),
                                kText, 2),
                       "sequence modality must begin with Embedding"));
}

TEST(Validate, OrderingAndEnds) {
  EXPECT_TRUE(mentions(validate(make({Dense{10, Activation::relu}, Conv2D{10, 3, Activation::relu},
                                      Dense{3, Activation::linear}}),
                                kImage, 3),
                       "after a Dense layer"));
  EXPECT_TRUE(mentions(
      validate(make({Dropout{0.5}, Conv2D{10, 3, Activation::relu}, Dense{3, Activation::linear}}),
               kImage, 3),
      "first layer is Dropout"));
  EXPECT_FALSE(validate(make({Conv2D{10, 3, Activation::relu}, Dense{4, Activation::linear}}),
                        kImage, 3)
                   .ok());
  EXPECT_FALSE(validate(make({Conv2D{10, 3, Activation::relu}, Dense{3, Activation::relu}}),
                        kImage, 3)
                   .ok());
  EXPECT_FALSE(validate(make({Conv2D{10, 3, Activation::relu}, MaxPool2D{2}}), kImage, 3).ok());
  EXPECT_FALSE(validate(make({Dense{3, Activation::linear}}), kImage, 3).ok());
  EXPECT_FALSE(validate(make({}), kImage, 3).ok());
}

TEST(Validate, BoundsAndActivations) {
  EXPECT_TRUE(mentions(
      validate(make({Conv2D{200, 3, Activation::relu}, Dense{3, Activation::linear}}), kImage, 3),
      "filters 200 out of [10,100]"));
  EXPECT_FALSE(
      validate(make({Conv2D{10, 7, Activation::relu}, Dense{3, Activation::linear}}), kImage, 3)
          .ok());
  EXPECT_FALSE(
      validate(make({Conv2D{10, 3, Activation::sigmoid}, Dense{3, Activation::linear}}), kImage, 3)
          .ok());
  EXPECT_FALSE(validate(make({Conv2D{10, 3, Activation::relu}, Dense{10, Activation::prelu},
                              Dense{3, Activation::linear}}),
                        kImage, 3)
                   .ok());
  EXPECT_FALSE(validate(make({Conv2D{10, 3, Activation::relu}, Dropout{1.0},
                              Dense{3, Activation::linear}}),
                        kImage, 3)
                   .ok());
  EXPECT_FALSE(
      validate(make({Conv2D{10, 3, Activation::relu}, Dense{3, Activation::linear}}, 0.5), kImage, 3)
          .ok());
}

TEST(Validate, DepthCap) {
  std::vector<Layer> layers(7, Conv2D{10, 1, Activation::relu});
  layers.push_back(Dense{3, Activation::linear});
  EXPECT_TRUE(validate(make(layers), kImage, 3).ok());
  layers.insert(layers.begin(), Conv2D{10, 1, Activation::relu});
  EXPECT_FALSE(validate(make(layers), kImage, 3).ok());
  LayerBounds wide;
  wide.max_size = 8;
  EXPECT_TRUE(validate(make(layers), kImage, 3, wide).ok());
}

// ---------------------------------------------------------------------------
// count_parameters

TEST(CountParameters, Conv2DSingleChannel) {
  const auto c = make({Conv2D{32, 3, Activation::relu}, Dense{3, Activation::linear}});
  const Shape in = input_shape(kImage);
  EXPECT_EQ(layer_parameter_count(c.layers[0], in, kImage), 320);
}

TEST(CountParameters, DropoutAndPoolingAreFree) {
  EXPECT_EQ(layer_parameter_count(Dropout{0.5}, GridShape{8, 8, 4}, kImage), 0);
  EXPECT_EQ(layer_parameter_count(MaxPool2D{2}, GridShape{8, 8, 4}, kImage), 0);
}

TEST(CountParameters, EmbeddingTable) {
  EXPECT_EQ(layer_parameter_count(Embedding{100}, SeqShape{100, 1}, kText), 100000);
}

TEST(CountParameters, WholeNetworkAndPrelu) {
  // conv: (9*1+1)*10 + 10 slopes = 110; pool 8x8 -> 4x4; dense: (4*4*10+1)*3 = 483
  const auto c = make({Conv2D{10, 3, Activation::prelu}, MaxPool2D{2}, Dense{3, Activation::linear}});
  EXPECT_EQ(count_parameters(c, kImage, 3), 110 + 483);
}

TEST(CountParameters, InvalidChromosomeThrows) {
  const auto c = make({Conv2D{10, 3, Activation::relu}, Dense{2, Activation::linear}});
  EXPECT_THROW(count_parameters(c, kText, 2), InvalidChromosome);
}

TEST(CountParameters, MatchesInstantiatedWeightArrays) {
  Rng rng(123);
  for (int i = 0; i < 50; ++i) {
    const bool text = i % 2 == 1;
    const TaskModality& m = text ? kText : kImage;
    const int classes = text ? 2 : 3;
    const auto c = random_chromosome(1 + i % 7, m, classes, {}, rng);
    Rng init(i);
    const nn::Network<double> net(c, m, classes, nn::TrainingHyper{}, init);
    std::int64_t brute = 0;
    for (std::size_t p = 0; p < net.num_parameter_arrays(); ++p) brute += net.parameter(p).value.size();
    EXPECT_EQ(count_parameters(c, m, classes), brute) << describe(c);
  }
}

// ---------------------------------------------------------------------------
// random generation

TEST(RandomLayer, CnnWithoutDropoutIsConv) {
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    const Layer l = random_layer(LayerContext::cnn, false, {}, rng);
    ASSERT_TRUE(is_conv(l)) << describe(l);
    EXPECT_TRUE(within_published_bounds(l, false));
  }
}

TEST(RandomLayer, NonCnnIsDenseOrDropout) {
  Rng rng(2);
  std::set<std::string> kinds;
  for (int i = 0; i < 500; ++i) {
    const Layer no_drop = random_layer(LayerContext::non_cnn, false, {}, rng);
    ASSERT_TRUE(is_dense(no_drop));
    const Layer any = random_layer(LayerContext::non_cnn, true, {}, rng);
    ASSERT_TRUE(is_dense(any) || is_dropout(any));
    kinds.insert(std::string(layer_type_name(any)));
  }
  EXPECT_EQ(kinds, (std::set<std::string>{"dense", "dropout"}));
}

TEST(RandomLayer, CnnWithDropoutCoversEveryFamily) {
  Rng rng(3);
  std::set<std::string> kinds;
  for (int i = 0; i < 2000; ++i) {
    const Layer l = random_layer(LayerContext::cnn, true, {}, rng);
    EXPECT_TRUE(within_published_bounds(l, false)) << describe(l);
    kinds.insert(std::string(layer_type_name(l)));
  }
  EXPECT_EQ(kinds, (std::set<std::string>{"conv1d", "conv2d", "dense", "dropout", "maxpool1d",
                                          "maxpool2d"}));
}

// Golden replays are recorded from libstdc++'s distributions.
TEST(RandomLayer, GoldenSeed42) {
  Rng rng(42);
  EXPECT_EQ(describe(random_layer(LayerContext::cnn, true, {}, rng)), "Dropout(0.639031)");
}

TEST(RandomLearningRate, LogUniformWithinBounds) {
  Rng rng(4);
  const LayerBounds b;
  int below_1e_2_5 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double lr = random_learning_rate(b, rng);
    ASSERT_GE(lr, 1e-4);
    ASSERT_LE(lr, 1e-1);
    if (lr < std::pow(10.0, -2.5)) ++below_1e_2_5;
  }
  // Log-uniform over three decades puts half the mass below 10^-2.5.
  const double frac = static_cast<double>(below_1e_2_5) / n;
  EXPECT_NEAR(frac, 0.5, 3 * std::sqrt(0.25 / n));
}

TEST(RandomChromosome, SizeOneImage) {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto c = random_chromosome(1, kImage, 3, {}, rng);
    ASSERT_EQ(c.layers.size(), 2u);
    EXPECT_TRUE(is_conv(c.layers[0]));
    const auto& t = std::get<Dense>(c.layers[1]);
    EXPECT_EQ(t.units, 3);
    EXPECT_TRUE(is_terminal_activation(t.activation));
    EXPECT_FALSE(c.fitness);
  }
}

TEST(RandomChromosome, SequenceStartsWithEmbedding) {
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    const auto c = random_chromosome(4, kText, 2, {}, rng);
    ASSERT_EQ(c.layers.size(), 5u);
    EXPECT_TRUE(is_embedding(c.layers[0]));
    for (std::size_t k = 1; k + 1 < c.layers.size(); ++k) {
      EXPECT_FALSE(is_2d(c.layers[k]));
      EXPECT_FALSE(is_embedding(c.layers[k]));
    }
    EXPECT_EQ(std::get<Dense>(c.layers.back()).units, 2);
  }
}

TEST(RandomChromosome, GoldenSeed7) {
  Rng rng(7);
  EXPECT_EQ(describe(random_chromosome(3, kImage, 3, {}, rng)), "lr=0.0116823 [Conv2D(72,k=3,prelu), Conv2D(89,k=1,prelu), "
            "Conv2D(87,k=5,linear), Dense(3,linear)]");
}

TEST(RandomChromosome, RejectsBadSizes) {
  Rng rng(8);
  EXPECT_THROW(random_chromosome(0, kImage, 3, {}, rng), std::invalid_argument);
  EXPECT_THROW(random_chromosome(8, kImage, 3, {}, rng), std::invalid_argument);
}

TEST(GenerationClosure, TenThousandChromosomesValidate) {
  Rng rng(10);
  for (int i = 0; i < 10000; ++i) {
    const bool text = i % 2 == 1;
    const TaskModality& m = text ? kText : kImage;
    const int classes = text ? 2 : 3;
    const auto c = random_chromosome(1 + i % 7, m, classes, {}, rng);
    const auto r = validate(c, m, classes);
    ASSERT_TRUE(r.ok()) << describe(c) << ": " << r.violations.front();
    for (std::size_t k = 0; k < c.layers.size(); ++k)
      ASSERT_TRUE(within_published_bounds(c.layers[k], k + 1 == c.layers.size()));
    ASSERT_GE(c.learning_rate, 1e-4);
    ASSERT_LE(c.learning_rate, 1e-1);
    Shape s = input_shape(m);
    for (const auto& l : c.layers) {
      s = infer_shape(l, s);
      ASSERT_GE(flat_size(s), 1);
    }
  }
}
