#include "archevo/serialize.hpp"

#include <cmath>
#include <json.hpp>
#include <set>

#include "archevo/errors.hpp"
#include "archevo/overloaded.hpp"

namespace archevo {

using nlohmann::json;

namespace {

json layer_to_json(const Layer& layer) {
  json j;
  j["type"] = std::string(layer_type_name(layer));
  std::visit(Overloaded{
                 [&](const Conv1D& l) {
                   j["filters"] = l.filters;
                   j["kernel"] = l.kernel;
                   j["activation"] = std::string(to_string(l.activation));
                 },
                 [&](const Conv2D& l) {
                   j["filters"] = l.filters;
                   j["kernel"] = l.kernel;
                   j["activation"] = std::string(to_string(l.activation));
                 },
                 [&](const MaxPool1D& l) { j["kernel"] = l.kernel; },
                 [&](const MaxPool2D& l) { j["kernel"] = l.kernel; },
                 [&](const Dense& l) {
                   j["units"] = l.units;
                   j["activation"] = std::string(to_string(l.activation));
                 },
                 [&](const Dropout& l) { j["keep_prob"] = l.keep_prob; },
                 [&](const Embedding& l) { j["output_dim"] = l.output_dim; },
             },
             layer);
  return j;
}

json to_json(const Chromosome& c) {
  json j;
  j["learning_rate"] = c.learning_rate;
  j["layers"] = json::array();
  for (const Layer& l : c.layers) j["layers"].push_back(layer_to_json(l));
  if (c.fitness) {
    const FitnessRecord& f = *c.fitness;
    json fj{{"val_error", f.val_error}, {"n_params", f.n_params}, {"score", f.score},
            {"alpha", f.alpha},         {"epochs_used", f.epochs_used}};
    if (f.diverged) fj["diverged"] = true;
    j["fitness"] = fj;
  }
  return j;
}

// Field accessors that report the offending path.

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw SchemaError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& get(const std::string& key) const {
    auto it = j_.find(key);
    if (it == j_.end()) throw SchemaError(field(key), "missing required field");
    return *it;
  }

  int integer(const std::string& key) const {
    const json& v = get(key);
    if (!v.is_number_integer()) throw SchemaError(field(key), "expected an integer");
    const auto x = v.get<std::int64_t>();
    if (x < INT32_MIN || x > INT32_MAX) throw SchemaError(field(key), "integer out of range");
    return static_cast<int>(x);
  }

  int integer_in(const std::string& key, IntRange range) const {
    const int v = integer(key);
    if (!range.contains(v))
      throw SchemaError(field(key), "out of [" + std::to_string(range.min) + "," +
                                        std::to_string(range.max) + "] (got " +
                                        std::to_string(v) + ")");
    return v;
  }

  double real(const std::string& key) const {
    const json& v = get(key);
    if (!v.is_number()) throw SchemaError(field(key), "expected a number");
    return v.get<double>();
  }

  std::string text(const std::string& key) const {
    const json& v = get(key);
    if (!v.is_string()) throw SchemaError(field(key), "expected a string");
    return v.get<std::string>();
  }

  Activation activation(bool terminal, bool conv) const {
    const std::string name = text("activation");
    const auto a = parse_activation(name);
    if (!a) throw SchemaError(field("activation"), "unknown activation '" + name + "'");
    const bool legal = conv ? is_conv_activation(*a)
                            : (terminal ? is_terminal_activation(*a) : is_dense_activation(*a));
    if (!legal) throw SchemaError(field("activation"), "'" + name + "' not allowed here");
    return *a;
  }

  void only(std::initializer_list<const char*> keys) const {
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!allowed.count(it.key())) throw SchemaError(field(it.key()), "unknown field");
  }

 private:
  const json& j_;
  std::string path_;
};

Layer layer_from_json(const json& j, const std::string& path, bool terminal,
                      const LayerBounds& bounds) {
  Reader r(j, path);
  const std::string type = r.text("type");
  if (type == "conv1d" || type == "conv2d") {
    r.only({"type", "filters", "kernel", "activation"});
    const int filters = r.integer_in("filters", bounds.filters);
    const int kernel = r.integer_in("kernel", bounds.conv_kernel);
    const Activation act = r.activation(false, true);
    if (type == "conv1d") return Conv1D{filters, kernel, act};
    return Conv2D{filters, kernel, act};
  }
  if (type == "maxpool1d" || type == "maxpool2d") {
    r.only({"type", "kernel"});
    const int kernel = r.integer_in("kernel", bounds.pool_kernel);
    if (type == "maxpool1d") return MaxPool1D{kernel};
    return MaxPool2D{kernel};
  }
  if (type == "dense") {
    r.only({"type", "units", "activation"});
    const int units = terminal ? r.integer_in("units", IntRange{1, INT32_MAX})
                               : r.integer_in("units", bounds.dense_units);
    return Dense{units, r.activation(terminal, false)};
  }
  if (type == "dropout") {
    r.only({"type", "keep_prob"});
    const double p = r.real("keep_prob");
    if (!(p > 0.0 && p < 1.0)) throw SchemaError(r.field("keep_prob"), "out of (0,1)");
    return Dropout{p};
  }
  if (type == "embedding") {
    r.only({"type", "output_dim"});
    return Embedding{r.integer_in("output_dim", bounds.embedding_dim)};
  }
  throw SchemaError(r.field("type"), "unknown layer type '" + type + "'");
}

FitnessRecord fitness_from_json(const json& j) {
  Reader r(j, "fitness");
  r.only({"val_error", "n_params", "score", "alpha", "epochs_used", "diverged"});
  FitnessRecord f;
  f.val_error = r.real("val_error");
  if (!(f.val_error >= 0.0 && f.val_error <= 1.0))
    throw SchemaError("fitness.val_error", "out of [0,1]");
  const json& n = r.get("n_params");
  if (!n.is_number_integer() || n.get<std::int64_t>() < 1)
    throw SchemaError("fitness.n_params", "expected a positive integer");
  f.n_params = n.get<std::int64_t>();
  f.score = r.real("score");
  if (r.has("alpha")) f.alpha = r.real("alpha");
  if (r.has("epochs_used")) f.epochs_used = r.integer("epochs_used");
  if (r.has("diverged")) {
    if (!r.get("diverged").is_boolean()) throw SchemaError("fitness.diverged", "expected a boolean");
    f.diverged = r.get("diverged").get<bool>();
  }
  return f;
}

}  // namespace

std::string serialize(const Chromosome& chromosome) { return to_json(chromosome).dump(2) + "\n"; }

std::string serialize(const ChromosomeDocument& document) {
  json j = to_json(document.chromosome);
  if (document.run) {
    j["run"] = json{{"test_accuracy", document.run->test_accuracy},
                    {"seed", document.run->seed},
                    {"epochs", document.run->epochs},
                    {"evaluator", document.run->evaluator},
                    {"batch_size", document.run->batch_size}};
  }
  return j.dump(2) + "\n";
}

ChromosomeDocument deserialize_document(std::string_view text, const LayerBounds& bounds) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed chromosome document: ") + e.what(), e.byte);
  }

  Reader r(j, "");
  r.only({"learning_rate", "layers", "fitness", "run"});
  ChromosomeDocument doc;
  Chromosome& c = doc.chromosome;
  c.learning_rate = r.real("learning_rate");
  if (!bounds.learning_rate.contains(c.learning_rate))
    throw SchemaError("learning_rate", "out of bounds");

  const json& layers = r.get("layers");
  if (!layers.is_array() || layers.empty())
    throw SchemaError("layers", "expected a non-empty array");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    c.layers.push_back(layer_from_json(layers[i], "layers[" + std::to_string(i) + "]",
                                       i + 1 == layers.size(), bounds));
  }
  if (!is_dense(c.layers.back())) throw SchemaError("layers", "last layer must be dense");

  if (r.has("fitness")) c.fitness = fitness_from_json(r.get("fitness"));
  if (r.has("run")) {
    Reader rr(r.get("run"), "run");
    rr.only({"test_accuracy", "seed", "epochs", "evaluator", "batch_size"});
    RunAnnotation a;
    a.test_accuracy = rr.real("test_accuracy");
    const json& s = rr.get("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
      throw SchemaError("run.seed", "expected a non-negative integer");
    a.seed = s.get<std::uint64_t>();
    a.epochs = rr.integer_in("epochs", IntRange{1, INT32_MAX});
    if (rr.has("evaluator")) a.evaluator = rr.text("evaluator");
    if (rr.has("batch_size")) a.batch_size = rr.integer_in("batch_size", IntRange{1, INT32_MAX});
    doc.run = a;
  }
  return doc;
}

Chromosome deserialize(std::string_view text, const LayerBounds& bounds) {
  return deserialize_document(text, bounds).chromosome;
}

}  // namespace archevo
