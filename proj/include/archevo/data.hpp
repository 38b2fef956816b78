#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "archevo/genome.hpp"
#include "archevo/rng.hpp"
#include "archevo/tensor.hpp"

namespace archevo {

/// Samples as rows. Image features are pixels in [0,1] laid out
/// (row, column, channel) with channel fastest; sequence features are token
/// indices stored as floats.
struct Partition {
  FeatureMatrix features;
  FeatureMatrix labels;  // one-hot, one row per sample

  std::size_t size() const noexcept { return static_cast<std::size_t>(features.rows()); }
  int num_classes() const noexcept { return static_cast<int>(labels.cols()); }
  std::vector<int> class_indices() const;
  Partition subset(std::span<const std::size_t> rows) const;
};

FeatureMatrix one_hot(std::span<const int> labels, int num_classes);

struct Dataset {
  TaskModality modality;
  int num_classes = 0;
  Partition train;
  Partition validation;
  Partition test;
  std::vector<std::string> class_names;

  /// Throws DataError when feature widths, label widths or one-hot rows are
  /// inconsistent.
  void check() const;
};

// ---------------------------------------------------------------------------
// Image CSV: one sample per line, "label,p1,...,pN".

struct ImageCsvFormat {
  int height = 28;
  int width = 28;
  int channels = 1;
  int num_classes = 10;
  double pixel_scale = 255.0;
};

Partition load_image_csv(const std::filesystem::path& path, const ImageCsvFormat& format);
Partition parse_image_csv(std::string_view text, const ImageCsvFormat& format);
/// Writes pixels as round(value * pixel_scale).
void write_image_csv(const std::filesystem::path& path, const Partition& partition,
                     double pixel_scale = 255.0);

// ---------------------------------------------------------------------------
// Text corpus: one sample per line, "label<TAB>text", UTF-8.

struct LabeledText {
  int label = 0;
  std::string text;
  bool operator==(const LabeledText&) const = default;
};

std::vector<LabeledText> load_text_corpus(const std::filesystem::path& path);
std::vector<LabeledText> parse_text_corpus(std::string_view text);
void write_text_corpus(const std::filesystem::path& path, std::span<const LabeledText> corpus);

/// Lowercases ASCII letters and splits on runs of ASCII non-alphanumeric
/// characters. Bytes >= 0x80 are kept inside tokens so UTF-8 words survive.
std::vector<std::string> tokenize(std::string_view text);

/// Frequency-ranked word list. Index 0 is reserved for padding and
/// out-of-vocabulary tokens; words take indices 1..size().
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> words_by_rank);

  int size() const noexcept { return static_cast<int>(words_.size()); }
  /// Rows needed by an embedding table over this vocabulary.
  int table_size() const noexcept { return size() + 1; }
  int index_of(std::string_view word) const;
  bool contains(std::string_view word) const { return index_of(word) != 0; }
  const std::vector<std::string>& words() const noexcept { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

/// Keeps the `size` most frequent tokens, ties broken lexicographically.
/// Throws DataError on an empty corpus.
Vocabulary build_vocabulary(std::span<const std::string> training_texts, int size = 1000);

/// Exactly `max_length` indices: truncated or right-padded with 0.
std::vector<int> encode_text(std::string_view text, const Vocabulary& vocab, int max_length);

// ---------------------------------------------------------------------------
// Splitting

/// Stratified seeded split of row indices into (train, validation). The
/// validation part has exactly round(n * fraction) rows; per-class counts
/// follow the fraction to within one sample, and every class with at least
/// two samples lands in both parts when the totals allow it. Single-sample
/// classes stay in train (a warning is written to std::clog).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::span<const int> labels, double validation_fraction, Rng& rng);

std::pair<Partition, Partition> split(const Partition& partition, double validation_fraction,
                                      Rng& rng);

/// Splits `train` into train/validation, builds the vocabulary from the
/// training part only and encodes all three partitions.
struct TextDatasetOptions {
  int vocab_size = 1000;
  int max_length = 100;
  double validation_fraction = 0.1;
  int num_classes = 0;  // 0: infer from the largest label
};

Dataset make_text_dataset(std::span<const LabeledText> train, std::span<const LabeledText> test,
                          const TextDatasetOptions& options, Rng& rng,
                          Vocabulary* vocab_out = nullptr);

Dataset make_text_dataset(std::span<const LabeledText> train,
                          std::span<const LabeledText> validation,
                          std::span<const LabeledText> test, const TextDatasetOptions& options,
                          Vocabulary* vocab_out = nullptr);

// ---------------------------------------------------------------------------
// Synthetic data

/// Class c is a bar through the grid centre at angle pi*c/classes, rendered
/// with a Gaussian cross-section (sigma 0.7 px); pixels get N(0, noise_std)
/// noise and are clipped to [0,1]. Sample i of a partition has class
/// i % classes.
struct SynthImageSpec {
  int train = 1000;
  int validation = 200;
  int test = 200;
  int classes = 3;
  int height = 8;
  int width = 8;
  double noise_std = 0.3;
  std::uint64_t seed = 0;
};

/// The noiseless template for one class.
FeatureMatrix image_template(int cls, const SynthImageSpec& spec);
Dataset synth_image_dataset(const SynthImageSpec& spec);

/// Two-class corpus: background words "w0000".."wNNNN" plus 1-3 keywords
/// from the label's keyword set inserted at random positions. With
/// label_noise > 0 each label is flipped with that probability after the
/// text is generated.
struct SynthSentimentSpec {
  int train = 2000;
  int validation = 400;
  int test = 400;
  int background_words = 2000;
  int min_words = 12;
  int max_words = 24;
  double label_noise = 0.0;
  std::uint64_t seed = 0;
};

const std::vector<std::string>& positive_keywords();
const std::vector<std::string>& negative_keywords();

struct SentimentCorpus {
  std::vector<LabeledText> train;
  std::vector<LabeledText> validation;
  std::vector<LabeledText> test;
};

SentimentCorpus synth_sentiment_corpus(const SynthSentimentSpec& spec);

/// Encodes the corpus with a vocabulary built from its training part.
Dataset synth_sentiment_dataset(const SynthSentimentSpec& spec, int vocab_size = 1000,
                                int max_length = 32);

/// Counts positive vs negative keywords; ties go to class 0.
int keyword_oracle(std::string_view text);

}  // namespace archevo
