#include "archevo/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "archevo/errors.hpp"

namespace archevo {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

/// Calls fn(line_number, line) for every non-empty line.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) fn(line_no, line);
    start = end + 1;
  }
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && first != last;
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<int> Partition::class_indices() const {
  std::vector<int> out(size());
  for (Eigen::Index r = 0; r < labels.rows(); ++r) {
    Eigen::Index idx = 0;
    labels.row(r).maxCoeff(&idx);
    out[static_cast<std::size_t>(r)] = static_cast<int>(idx);
  }
  return out;
}

Partition Partition::subset(std::span<const std::size_t> rows) const {
  Partition p;
  p.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  p.labels.resize(static_cast<Eigen::Index>(rows.size()), labels.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    p.features.row(static_cast<Eigen::Index>(i)) = features.row(r);
    p.labels.row(static_cast<Eigen::Index>(i)) = labels.row(r);
  }
  return p;
}

FeatureMatrix one_hot(std::span<const int> labels, int num_classes) {
  FeatureMatrix m = FeatureMatrix::Zero(static_cast<Eigen::Index>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw DataError("label " + std::to_string(labels[i]) + " out of range [0," +
                      std::to_string(num_classes) + ")");
    m(static_cast<Eigen::Index>(i), labels[i]) = 1.0f;
  }
  return m;
}

void Dataset::check() const {
  const Eigen::Index width = flat_size(input_shape(modality));
  auto check_part = [&](const Partition& p, const char* name) {
    if (p.features.rows() != p.labels.rows())
      throw DataError(std::string(name) + ": feature and label row counts differ");
    if (p.features.rows() > 0 && p.features.cols() != width)
      throw DataError(std::string(name) + ": feature width " + std::to_string(p.features.cols()) +
                      " does not match " + modality.describe());
    if (p.labels.rows() > 0 && p.labels.cols() != num_classes)
      throw DataError(std::string(name) + ": label width does not match num_classes");
    for (Eigen::Index r = 0; r < p.labels.rows(); ++r) {
      const auto row = p.labels.row(r);
      if (row.sum() != 1.0f || row.maxCoeff() != 1.0f || row.minCoeff() != 0.0f)
        throw DataError(std::string(name) + ": label row " + std::to_string(r) +
                        " is not one-hot");
    }
  };
  if (num_classes < 1) throw DataError("num_classes must be >= 1");
  check_part(train, "train");
  check_part(validation, "validation");
  check_part(test, "test");
}

// ---------------------------------------------------------------------------
// Image CSV

Partition parse_image_csv(std::string_view text, const ImageCsvFormat& format) {
  const std::size_t n_pixels =
      static_cast<std::size_t>(format.height) * format.width * format.channels;
  std::vector<int> labels;
  std::vector<float> pixels;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const std::string where = "line " + std::to_string(line_no) + ": ";
    std::size_t fields = 0;
    std::size_t start = 0;
    while (true) {
      std::size_t end = line.find(',', start);
      const std::string_view cell =
          line.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
      if (fields == 0) {
        int label = 0;
        if (!parse_number(cell, label)) throw DataError(where + "malformed label");
        if (label < 0 || label >= format.num_classes)
          throw DataError(where + "label " + std::to_string(label) + " out of range [0," +
                          std::to_string(format.num_classes) + ")");
        labels.push_back(label);
      } else {
        double v = 0;
        if (!parse_number(cell, v)) throw DataError(where + "malformed pixel value");
        if (fields <= n_pixels) pixels.push_back(static_cast<float>(v / format.pixel_scale));
      }
      ++fields;
      if (end == std::string_view::npos) break;
      start = end + 1;
    }
    if (fields != n_pixels + 1)
      throw DataError(where + "malformed row: expected " + std::to_string(n_pixels + 1) +
                      " columns, got " + std::to_string(fields));
  });

  Partition p;
  p.features = Eigen::Map<FeatureMatrix>(pixels.data(), static_cast<Eigen::Index>(labels.size()),
                                         static_cast<Eigen::Index>(n_pixels));
  p.labels = one_hot(labels, format.num_classes);
  return p;
}

Partition load_image_csv(const std::filesystem::path& path, const ImageCsvFormat& format) {
  try {
    return parse_image_csv(read_file(path), format);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_image_csv(const std::filesystem::path& path, const Partition& partition,
                     double pixel_scale) {
  auto out = open_for_write(path);
  const auto labels = partition.class_indices();
  for (Eigen::Index r = 0; r < partition.features.rows(); ++r) {
    out << labels[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < partition.features.cols(); ++c)
      out << ',' << std::lround(partition.features(r, c) * pixel_scale);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Text

std::vector<LabeledText> parse_text_corpus(std::string_view text) {
  std::vector<LabeledText> out;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const std::size_t tab = line.find('\t');
    int label = 0;
    if (tab == std::string_view::npos || !parse_number(line.substr(0, tab), label) || label < 0)
      throw DataError("line " + std::to_string(line_no) + ": expected 'label<TAB>text'");
    out.push_back({label, std::string(line.substr(tab + 1))});
  });
  return out;
}

std::vector<LabeledText> load_text_corpus(const std::filesystem::path& path) {
  try {
    return parse_text_corpus(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_text_corpus(const std::filesystem::path& path, std::span<const LabeledText> corpus) {
  auto out = open_for_write(path);
  for (const auto& s : corpus) {
    if (s.text.find_first_of("\t\n") != std::string::npos)
      throw DataError("text contains a tab or newline");
    out << s.label << '\t' << s.text << '\n';
  }
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    const bool word = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      c >= 0x80;
    if (word) {
      current.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Vocabulary::Vocabulary(std::vector<std::string> words_by_rank) : words_(std::move(words_by_rank)) {
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], static_cast<int>(i) + 1).second)
      throw DataError("duplicate vocabulary word '" + words_[i] + "'");
  }
}

int Vocabulary::index_of(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? 0 : it->second;
}

Vocabulary build_vocabulary(std::span<const std::string> training_texts, int size) {
  if (size < 1) throw std::invalid_argument("vocabulary size must be >= 1");
  std::map<std::string, std::int64_t> counts;
  for (const auto& text : training_texts)
    for (auto& token : tokenize(text)) ++counts[std::move(token)];
  if (counts.empty()) throw DataError("cannot build a vocabulary from an empty corpus");

  std::vector<std::pair<std::string, std::int64_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (static_cast<int>(ranked.size()) > size) ranked.resize(static_cast<std::size_t>(size));
  std::vector<std::string> words;
  words.reserve(ranked.size());
  for (auto& [w, n] : ranked) words.push_back(std::move(w));
  return Vocabulary(std::move(words));
}

std::vector<int> encode_text(std::string_view text, const Vocabulary& vocab, int max_length) {
  std::vector<int> out(static_cast<std::size_t>(std::max(max_length, 0)), 0);
  std::size_t i = 0;
  for (const auto& token : tokenize(text)) {
    if (i >= out.size()) break;
    out[i++] = vocab.index_of(token);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splitting

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::span<const int> labels, double validation_fraction, Rng& rng) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw std::invalid_argument("validation fraction must lie in (0,1)");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (auto& [cls, rows] : by_class) {
    std::shuffle(rows.begin(), rows.end(), rng);
    if (rows.size() == 1)
      std::clog << "warning: class " << cls << " has a single sample; placed in train\n";
  }

  // Largest-remainder quotas so the total is exactly round(n * fraction).
  const auto total = static_cast<std::int64_t>(std::llround(labels.size() * validation_fraction));
  struct Quota {
    int cls;
    std::int64_t n;
    std::int64_t take;
    double remainder;
  };
  std::vector<Quota> quotas;
  std::int64_t assigned = 0;
  for (const auto& [cls, rows] : by_class) {
    const double exact = static_cast<double>(rows.size()) * validation_fraction;
    const auto base = static_cast<std::int64_t>(std::floor(exact));
    quotas.push_back({cls, static_cast<std::int64_t>(rows.size()), base, exact - base});
    assigned += base;
  }
  std::vector<std::size_t> order(quotas.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return quotas[a].remainder > quotas[b].remainder;
  });
  for (std::size_t k = 0; assigned < total && k < order.size(); ++k) {
    ++quotas[order[k]].take;
    ++assigned;
  }

  // Keep classes with >= 2 samples present on both sides where possible.
  auto largest_where = [&](auto pred) -> Quota* {
    Quota* best = nullptr;
    for (auto& q : quotas)
      if (pred(q) && (!best || q.take > best->take)) best = &q;
    return best;
  };
  for (auto& q : quotas) {
    if (q.n < 2) {
      if (q.take > 0) {
        if (Quota* other = largest_where([](const Quota& o) { return o.n >= 2 && o.take < o.n - 1; }))
          ++other->take;
        q.take = 0;
      }
      continue;
    }
    if (q.take == 0) {
      if (Quota* donor = largest_where([&](const Quota& o) { return &o != &q && o.take > 1; })) {
        --donor->take;
        q.take = 1;
      }
    } else if (q.take == q.n) {
      if (Quota* sink = largest_where([&](const Quota& o) { return &o != &q && o.take < o.n - 1; })) {
        ++sink->take;
        q.take = q.n - 1;
      }
    }
  }

  std::vector<std::size_t> train, validation;
  for (const auto& q : quotas) {
    const auto& rows = by_class[q.cls];
    validation.insert(validation.end(), rows.begin(), rows.begin() + q.take);
    train.insert(train.end(), rows.begin() + q.take, rows.end());
  }
  std::shuffle(train.begin(), train.end(), rng);
  std::shuffle(validation.begin(), validation.end(), rng);
  return {std::move(train), std::move(validation)};
}

std::pair<Partition, Partition> split(const Partition& partition, double validation_fraction,
                                      Rng& rng) {
  const auto labels = partition.class_indices();
  auto [train, validation] = split_indices(labels, validation_fraction, rng);
  return {partition.subset(train), partition.subset(validation)};
}

namespace {

Partition encode_partition(std::span<const LabeledText> texts, const Vocabulary& vocab,
                           int max_length, int num_classes) {
  Partition p;
  p.features.resize(static_cast<Eigen::Index>(texts.size()), max_length);
  std::vector<int> labels;
  labels.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto ids = encode_text(texts[i].text, vocab, max_length);
    for (int j = 0; j < max_length; ++j)
      p.features(static_cast<Eigen::Index>(i), j) = static_cast<float>(ids[static_cast<std::size_t>(j)]);
    labels.push_back(texts[i].label);
  }
  p.labels = one_hot(labels, num_classes);
  return p;
}

int infer_classes(std::initializer_list<std::span<const LabeledText>> parts) {
  int max_label = 0;
  for (auto part : parts)
    for (const auto& s : part) max_label = std::max(max_label, s.label);
  return std::max(max_label + 1, 2);
}

}  // namespace

Dataset make_text_dataset(std::span<const LabeledText> train,
                          std::span<const LabeledText> validation,
                          std::span<const LabeledText> test, const TextDatasetOptions& options,
                          Vocabulary* vocab_out) {
  if (train.empty()) throw DataError("text dataset has no training samples");
  std::vector<std::string> train_texts;
  train_texts.reserve(train.size());
  for (const auto& s : train) train_texts.push_back(s.text);
  Vocabulary vocab = build_vocabulary(train_texts, options.vocab_size);

  Dataset d;
  d.num_classes =
      options.num_classes > 0 ? options.num_classes : infer_classes({train, validation, test});
  d.modality = TaskModality::sequence(options.max_length, vocab.table_size());
  d.train = encode_partition(train, vocab, options.max_length, d.num_classes);
  d.validation = encode_partition(validation, vocab, options.max_length, d.num_classes);
  d.test = encode_partition(test, vocab, options.max_length, d.num_classes);
  if (vocab_out) *vocab_out = std::move(vocab);
  return d;
}

Dataset make_text_dataset(std::span<const LabeledText> train, std::span<const LabeledText> test,
                          const TextDatasetOptions& options, Rng& rng, Vocabulary* vocab_out) {
  std::vector<int> labels;
  labels.reserve(train.size());
  for (const auto& s : train) labels.push_back(s.label);
  auto [tr, va] = split_indices(labels, options.validation_fraction, rng);
  std::vector<LabeledText> train_part, val_part;
  for (auto i : tr) train_part.push_back(train[i]);
  for (auto i : va) val_part.push_back(train[i]);
  TextDatasetOptions opts = options;
  if (opts.num_classes == 0) opts.num_classes = infer_classes({train, test});
  return make_text_dataset(train_part, val_part, test, opts, vocab_out);
}

// ---------------------------------------------------------------------------
// Synthetic images

FeatureMatrix image_template(int cls, const SynthImageSpec& spec) {
  constexpr double kSigma = 0.7;
  const double theta = std::numbers::pi * cls / spec.classes;
  const double cx = (spec.width - 1) / 2.0;
  const double cy = (spec.height - 1) / 2.0;
  FeatureMatrix t(spec.height, spec.width);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const double d = -(x - cx) * std::sin(theta) + (y - cy) * std::cos(theta);
      t(y, x) = static_cast<float>(std::exp(-d * d / (2 * kSigma * kSigma)));
    }
  }
  return t;
}

Dataset synth_image_dataset(const SynthImageSpec& spec) {
  if (spec.classes < 2) throw std::invalid_argument("synthetic image data needs >= 2 classes");
  if (spec.height < 1 || spec.width < 1) throw std::invalid_argument("grid must be >= 1x1");

  std::vector<FeatureMatrix> templates;
  for (int c = 0; c < spec.classes; ++c) templates.push_back(image_template(c, spec));

  Rng rng(derive_seed(spec.seed, {0x1a4e}));
  std::normal_distribution<double> noise(0.0, 1.0);
  const int pixels = spec.height * spec.width;
  auto make = [&](int n) {
    Partition p;
    p.features.resize(n, pixels);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const int cls = i % spec.classes;
      labels[static_cast<std::size_t>(i)] = cls;
      const auto& t = templates[static_cast<std::size_t>(cls)];
      for (int k = 0; k < pixels; ++k) {
        double v = t(k / spec.width, k % spec.width);
        if (spec.noise_std > 0) v += spec.noise_std * noise(rng);
        p.features(i, k) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
    p.labels = one_hot(labels, spec.classes);
    return p;
  };

  Dataset d;
  d.modality = TaskModality::image2d(spec.height, spec.width, 1);
  d.num_classes = spec.classes;
  d.train = make(spec.train);
  d.validation = make(spec.validation);
  d.test = make(spec.test);
  for (int c = 0; c < spec.classes; ++c) d.class_names.push_back("bar" + std::to_string(c));
  return d;
}

// ---------------------------------------------------------------------------
// Synthetic sentiment

const std::vector<std::string>& positive_keywords() {
  static const std::vector<std::string> words{"good",    "great", "excellent", "superb",
                                              "love",    "enjoy", "wonderful", "brilliant"};
  return words;
}

const std::vector<std::string>& negative_keywords() {
  static const std::vector<std::string> words{"bad",      "awful", "terrible", "poor",
                                              "hate",     "boring", "dreadful", "broken"};
  return words;
}

SentimentCorpus synth_sentiment_corpus(const SynthSentimentSpec& spec) {
  if (spec.train < 1 || spec.background_words < 1 || spec.min_words < 1 ||
      spec.max_words < spec.min_words)
    throw std::invalid_argument("invalid synthetic sentiment spec");

  std::vector<std::string> background;
  background.reserve(static_cast<std::size_t>(spec.background_words));
  for (int i = 0; i < spec.background_words; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "w%04d", i);
    background.emplace_back(buf);
  }

  Rng rng(derive_seed(spec.seed, {0x5e47}));
  std::uniform_int_distribution<int> length(spec.min_words, spec.max_words);
  std::uniform_int_distribution<std::size_t> word(0, background.size() - 1);
  std::uniform_int_distribution<int> n_keywords(1, 3);
  std::bernoulli_distribution flip(spec.label_noise);

  auto make = [&](int n) {
    std::vector<LabeledText> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const int label = i % 2;
      const auto& keywords = label == 1 ? positive_keywords() : negative_keywords();
      std::vector<std::string> words(static_cast<std::size_t>(length(rng)));
      for (auto& w : words) w = background[word(rng)];
      const int k = n_keywords(rng);
      for (int j = 0; j < k; ++j) {
        std::uniform_int_distribution<std::size_t> pos(0, words.size());
        std::uniform_int_distribution<std::size_t> which(0, keywords.size() - 1);
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos(rng)), keywords[which(rng)]);
      }
      std::string text;
      for (std::size_t j = 0; j < words.size(); ++j) {
        if (j) text.push_back(' ');
        text += words[j];
      }
      const bool flipped = spec.label_noise > 0 && flip(rng);
      out.push_back({flipped ? 1 - label : label, std::move(text)});
    }
    return out;
  };

  SentimentCorpus c;
  c.train = make(spec.train);
  c.validation = make(spec.validation);
  c.test = make(spec.test);
  return c;
}

Dataset synth_sentiment_dataset(const SynthSentimentSpec& spec, int vocab_size, int max_length) {
  const SentimentCorpus c = synth_sentiment_corpus(spec);
  TextDatasetOptions opts;
  opts.vocab_size = vocab_size;
  opts.max_length = max_length;
  opts.num_classes = 2;
  Dataset d = make_text_dataset(c.train, c.validation, c.test, opts);
  d.class_names = {"negative", "positive"};
  return d;
}

int keyword_oracle(std::string_view text) {
  int score = 0;
  for (const auto& token : tokenize(text)) {
    if (std::find(positive_keywords().begin(), positive_keywords().end(), token) !=
        positive_keywords().end())
      ++score;
    if (std::find(negative_keywords().begin(), negative_keywords().end(), token) !=
        negative_keywords().end())
      --score;
  }
  return score > 0 ? 1 : 0;
}

}  // namespace archevo
