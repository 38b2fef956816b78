#include "archevo/nn/network.hpp"

#include <climits>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "archevo/errors.hpp"
#include "archevo/overloaded.hpp"

namespace archevo::nn {

void TrainingHyper::check() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(weight_init_std > 0)) throw std::invalid_argument("weight_init_std must be > 0");
  if (!(adam_beta1 > 0 && adam_beta1 < 1)) throw std::invalid_argument("adam_beta1 must lie in (0,1)");
  if (!(adam_beta2 > 0 && adam_beta2 < 1)) throw std::invalid_argument("adam_beta2 must lie in (0,1)");
  if (!(adam_epsilon > 0)) throw std::invalid_argument("adam_epsilon must be > 0");
  if (!(prob_clamp > 0 && prob_clamp < 0.5)) throw std::invalid_argument("prob_clamp must lie in (0,0.5)");
}

namespace {

template <typename T>
using MatrixMap = Eigen::Map<Matrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const Matrix<T>>;

template <typename T>
T sigmoid(T v) {
  if (v >= 0) return T(1) / (T(1) + std::exp(-v));
  const T e = std::exp(v);
  return e / (T(1) + e);
}

/// Turns dLoss/dA (in `d`) into dLoss/dZ in place, accumulating PReLU slope
/// gradients into `d_slope`.
template <typename T>
void activation_backward(Activation act, const Matrix<T>& z, const Matrix<T>& a, Matrix<T>& d,
                         const T* slope, T* d_slope, int channels) {
  switch (act) {
    case Activation::linear:
      return;
    case Activation::relu:
      d.array() *= (z.array() > T(0)).template cast<T>();
      return;
    case Activation::leaky_relu:
      d = d.binaryExpr(z, [](T g, T v) { return v > 0 ? g : T(kLeakyReluSlope) * g; });
      return;
    case Activation::prelu: {
      const Eigen::Index cols = z.cols();
      const T* zp = z.data();
      T* dp = d.data();
      const Eigen::Index n = z.size();
      for (Eigen::Index i = 0; i < n; ++i) {
        const int c = static_cast<int>((i % cols) % channels);
        if (zp[i] <= 0) {
          d_slope[c] += dp[i] * zp[i];
          dp[i] *= slope[c];
        }
      }
      return;
    }
    case Activation::sigmoid:
      d.array() *= a.array() * (T(1) - a.array());
      return;
    case Activation::softmax:
      for (Eigen::Index r = 0; r < d.rows(); ++r) {
        const T s = d.row(r).dot(a.row(r));
        d.row(r).array() = a.row(r).array() * (d.row(r).array() - s);
      }
      return;
  }
}

template <typename T>
void init_gaussian(Matrix<T>& m, const TrainingHyper& hyper, Rng& rng) {
  std::normal_distribution<double> dist(hyper.weight_init_mean, hyper.weight_init_std);
  T* p = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i) p[i] = static_cast<T>(dist(rng));
}

template <typename T>
Parameter<T> make_param(std::string name, Eigen::Index rows, Eigen::Index cols) {
  Parameter<T> p;
  p.name = std::move(name);
  p.value = Matrix<T>::Zero(rows, cols);
  p.adam_m = Matrix<T>::Zero(rows, cols);
  p.adam_v = Matrix<T>::Zero(rows, cols);
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------

template <typename T>
void activate(Activation act, const Matrix<T>& z, Matrix<T>& a, const T* slope, int channels) {
  a.resize(z.rows(), z.cols());
  switch (act) {
    case Activation::linear:
      a = z;
      return;
    case Activation::relu:
      a = z.cwiseMax(T(0));
      return;
    case Activation::leaky_relu:
      a = z.unaryExpr([](T v) { return v > 0 ? v : T(kLeakyReluSlope) * v; });
      return;
    case Activation::prelu: {
      const Eigen::Index cols = z.cols();
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        const T v = z.data()[i];
        a.data()[i] = v > 0 ? v : slope[(i % cols) % channels] * v;
      }
      return;
    }
    case Activation::sigmoid:
      a = z.unaryExpr([](T v) { return sigmoid(v); });
      return;
    case Activation::softmax:
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const T m = z.row(r).maxCoeff();
        a.row(r) = (z.row(r).array() - m).exp().matrix();
        a.row(r) /= a.row(r).sum();
      }
      return;
  }
}

template <typename T>
double categorical_cross_entropy(const Matrix<T>& out, const Matrix<T>& y, Activation terminal,
                                 double clamp, Matrix<T>* d_out) {
  if (out.rows() != y.rows() || out.cols() != y.cols())
    throw ShapeError("cross entropy: output and label shapes differ");
  const Eigen::Index batch = out.rows();
  if (batch == 0) throw std::invalid_argument("cross entropy: empty batch");
  const T inv_b = T(1) / static_cast<T>(batch);
  const T lo = static_cast<T>(clamp);
  const T hi = static_cast<T>(1.0 - clamp);
  if (d_out) d_out->setZero(out.rows(), out.cols());

  double total = 0.0;
  for (Eigen::Index r = 0; r < batch; ++r) {
    const auto yr = y.row(r);
    switch (terminal) {
      case Activation::linear: {
        const T m = out.row(r).maxCoeff();
        const RowVector<T> e = (out.row(r).array() - m).exp().matrix();
        const T sum = e.sum();
        const double lse = static_cast<double>(m) + std::log(static_cast<double>(sum));
        total += lse * static_cast<double>(yr.sum()) - static_cast<double>(yr.dot(out.row(r)));
        if (d_out) d_out->row(r) = (e / sum * yr.sum() - yr) * inv_b;
        break;
      }
      case Activation::softmax: {
        for (Eigen::Index c = 0; c < out.cols(); ++c) {
          if (yr(c) == T(0)) continue;
          const T p = out(r, c);
          const T pc = std::clamp(p, lo, hi);
          total -= static_cast<double>(yr(c)) * std::log(static_cast<double>(pc));
          if (d_out && p > lo && p < hi) (*d_out)(r, c) = -yr(c) / pc * inv_b;
        }
        break;
      }
      case Activation::sigmoid: {
        const T s = out.row(r).sum();
        RowVector<T> dq = RowVector<T>::Zero(out.cols());
        for (Eigen::Index c = 0; c < out.cols(); ++c) {
          if (yr(c) == T(0)) continue;
          const T q = out(r, c) / s;
          const T qc = std::clamp(q, lo, hi);
          total -= static_cast<double>(yr(c)) * std::log(static_cast<double>(qc));
          if (q > lo && q < hi) dq(c) = -yr(c) / qc * inv_b;
        }
        if (d_out) {
          const T proj = dq.dot(out.row(r)) / s;
          d_out->row(r) = ((dq.array() - proj) / s).matrix();
        }
        break;
      }
      default:
        throw std::invalid_argument("cross entropy: unsupported terminal activation");
    }
  }
  return total / static_cast<double>(batch);
}

// ---------------------------------------------------------------------------
// Layer operations

template <typename T>
class LayerOp {
 public:
  virtual ~LayerOp() = default;
  virtual void forward(const Matrix<T>& in, Matrix<T>& out, Mode mode, Rng* rng) = 0;
  /// `dout` may be overwritten. `din` is null for the first layer. `grads`
  /// points at this op's zero-initialised gradient arrays (accumulate).
  virtual void backward(const Matrix<T>& in, const Matrix<T>& out, Matrix<T>& dout,
                        Matrix<T>* din, Matrix<T>* grads) = 0;

  std::vector<Parameter<T>> params;
};

namespace {

/// Activation that owns an optional PReLU slope stored as the op's last
/// parameter.
template <typename T>
struct ActivationUnit {
  Activation kind = Activation::linear;
  int channels = 1;
  Matrix<T> z;

  void add_params(std::vector<Parameter<T>>& params, const std::string& prefix) {
    if (kind != Activation::prelu) return;
    auto p = make_param<T>(prefix + ".prelu", 1, channels);
    p.value.setConstant(static_cast<T>(kPreluInitialSlope));
    params.push_back(std::move(p));
  }

  void forward(const std::vector<Parameter<T>>& params, Matrix<T>& out) const {
    activate<T>(kind, z, out, kind == Activation::prelu ? params.back().value.data() : nullptr,
                channels);
  }

  void backward(const std::vector<Parameter<T>>& params, const Matrix<T>& out, Matrix<T>& dout,
                Matrix<T>* grads) const {
    const bool prelu = kind == Activation::prelu;
    activation_backward<T>(kind, z, out, dout, prelu ? params.back().value.data() : nullptr,
                           prelu ? grads[params.size() - 1].data() : nullptr, channels);
  }
};

template <typename T>
class DenseOp final : public LayerOp<T> {
 public:
  DenseOp(int in, int units, Activation act, const std::string& prefix, const TrainingHyper& h,
          Rng& rng) {
    act_.kind = act;
    act_.channels = units;
    this->params.push_back(make_param<T>(prefix + ".weight", in, units));
    init_gaussian(this->params[0].value, h, rng);
    this->params.push_back(make_param<T>(prefix + ".bias", 1, units));
    act_.add_params(this->params, prefix);
  }

  void forward(const Matrix<T>& in, Matrix<T>& out, Mode, Rng*) override {
    act_.z.noalias() = in * this->params[0].value;
    act_.z.rowwise() += this->params[1].value.row(0);
    act_.forward(this->params, out);
  }

  void backward(const Matrix<T>& in, const Matrix<T>& out, Matrix<T>& dout, Matrix<T>* din,
                Matrix<T>* grads) override {
    act_.backward(this->params, out, dout, grads);
    grads[0].noalias() += in.transpose() * dout;
    grads[1] += dout.colwise().sum();
    if (din) din->noalias() = dout * this->params[0].value.transpose();
  }

 private:
  ActivationUnit<T> act_;
};

/// Geometry of a same-padded, stride-1 convolution or a stride=kernel pool
/// over an (height, width, channels) grid. 1D layers use width = 1.
struct Grid {
  int height;
  int width;
  int channels;
  int kernel_h;
  int kernel_w;
};

template <typename T>
class ConvOp final : public LayerOp<T> {
 public:
  ConvOp(Grid g, int filters, Activation act, const std::string& prefix, const TrainingHyper& h,
         Rng& rng)
      : g_(g), filters_(filters) {
    act_.kind = act;
    act_.channels = filters;
    patch_ = g.kernel_h * g.kernel_w * g.channels;
    this->params.push_back(make_param<T>(prefix + ".weight", patch_, filters));
    init_gaussian(this->params[0].value, h, rng);
    this->params.push_back(make_param<T>(prefix + ".bias", 1, filters));
    act_.add_params(this->params, prefix);
  }

  void forward(const Matrix<T>& in, Matrix<T>& out, Mode, Rng*) override {
    const Eigen::Index positions = Eigen::Index{g_.height} * g_.width;
    act_.z.resize(in.rows(), positions * filters_);
    const auto& weight = this->params[0].value;
    const auto bias = this->params[1].value.row(0);
    for (Eigen::Index s = 0; s < in.rows(); ++s) {
      im2col(in.row(s).data(), cols_);
      MatrixMap<T> zs(act_.z.row(s).data(), positions, filters_);
      zs.noalias() = cols_ * weight;
      zs.rowwise() += bias;
    }
    act_.forward(this->params, out);
  }

  void backward(const Matrix<T>& in, const Matrix<T>& out, Matrix<T>& dout, Matrix<T>* din,
                Matrix<T>* grads) override {
    act_.backward(this->params, out, dout, grads);
    const Eigen::Index positions = Eigen::Index{g_.height} * g_.width;
    const auto& weight = this->params[0].value;
    if (din) din->setZero(in.rows(), in.cols());
    for (Eigen::Index s = 0; s < in.rows(); ++s) {
      im2col(in.row(s).data(), cols_);
      ConstMatrixMap<T> dz(dout.row(s).data(), positions, filters_);
      grads[0].noalias() += cols_.transpose() * dz;
      grads[1] += dz.colwise().sum();
      if (din) {
        dcols_.noalias() = dz * weight.transpose();
        col2im(dcols_, din->row(s).data());
      }
    }
  }

 private:
  // Patch column layout: ((dy * kernel_w + dx) * channels + c).
  void im2col(const T* x, Matrix<T>& cols) const {
    const int pad_h = (g_.kernel_h - 1) / 2;
    const int pad_w = (g_.kernel_w - 1) / 2;
    cols.setZero(Eigen::Index{g_.height} * g_.width, patch_);
    for (int y = 0; y < g_.height; ++y) {
      for (int xx = 0; xx < g_.width; ++xx) {
        T* row = cols.row(Eigen::Index{y} * g_.width + xx).data();
        for (int dy = 0; dy < g_.kernel_h; ++dy) {
          const int iy = y + dy - pad_h;
          if (iy < 0 || iy >= g_.height) continue;
          for (int dx = 0; dx < g_.kernel_w; ++dx) {
            const int ix = xx + dx - pad_w;
            if (ix < 0 || ix >= g_.width) continue;
            const T* src = x + (std::ptrdiff_t{iy} * g_.width + ix) * g_.channels;
            T* dst = row + (std::ptrdiff_t{dy} * g_.kernel_w + dx) * g_.channels;
            std::copy(src, src + g_.channels, dst);
          }
        }
      }
    }
  }

  void col2im(const Matrix<T>& cols, T* dx_out) const {
    const int pad_h = (g_.kernel_h - 1) / 2;
    const int pad_w = (g_.kernel_w - 1) / 2;
    for (int y = 0; y < g_.height; ++y) {
      for (int xx = 0; xx < g_.width; ++xx) {
        const T* row = cols.row(Eigen::Index{y} * g_.width + xx).data();
        for (int dy = 0; dy < g_.kernel_h; ++dy) {
          const int iy = y + dy - pad_h;
          if (iy < 0 || iy >= g_.height) continue;
          for (int dx = 0; dx < g_.kernel_w; ++dx) {
            const int ix = xx + dx - pad_w;
            if (ix < 0 || ix >= g_.width) continue;
            T* dst = dx_out + (std::ptrdiff_t{iy} * g_.width + ix) * g_.channels;
            const T* src = row + (std::ptrdiff_t{dy} * g_.kernel_w + dx) * g_.channels;
            for (int c = 0; c < g_.channels; ++c) dst[c] += src[c];
          }
        }
      }
    }
  }

  Grid g_;
  int filters_;
  Eigen::Index patch_;
  ActivationUnit<T> act_;
  Matrix<T> cols_;
  Matrix<T> dcols_;
};

template <typename T>
class PoolOp final : public LayerOp<T> {
 public:
  explicit PoolOp(Grid g) : g_(g), out_h_(g.height / g.kernel_h), out_w_(g.width / g.kernel_w) {}

  void forward(const Matrix<T>& in, Matrix<T>& out, Mode, Rng*) override {
    const Eigen::Index out_cols = Eigen::Index{out_h_} * out_w_ * g_.channels;
    out.resize(in.rows(), out_cols);
    argmax_.resize(static_cast<std::size_t>(in.rows() * out_cols));
    for (Eigen::Index s = 0; s < in.rows(); ++s) {
      const T* x = in.row(s).data();
      for (int oy = 0; oy < out_h_; ++oy) {
        for (int ox = 0; ox < out_w_; ++ox) {
          for (int c = 0; c < g_.channels; ++c) {
            int best = -1;
            T best_v = -std::numeric_limits<T>::infinity();
            for (int dy = 0; dy < g_.kernel_h; ++dy) {
              for (int dx = 0; dx < g_.kernel_w; ++dx) {
                const int iy = oy * g_.kernel_h + dy;
                const int ix = ox * g_.kernel_w + dx;
                const int idx = (iy * g_.width + ix) * g_.channels + c;
                if (best < 0 || x[idx] > best_v) {
                  best = idx;
                  best_v = x[idx];
                }
              }
            }
            const Eigen::Index o = (Eigen::Index{oy} * out_w_ + ox) * g_.channels + c;
            out(s, o) = best_v;
            argmax_[static_cast<std::size_t>(s * out_cols + o)] = best;
          }
        }
      }
    }
  }

  void backward(const Matrix<T>& in, const Matrix<T>& out, Matrix<T>& dout, Matrix<T>* din,
                Matrix<T>*) override {
    if (!din) return;
    din->setZero(in.rows(), in.cols());
    const Eigen::Index out_cols = out.cols();
    for (Eigen::Index s = 0; s < in.rows(); ++s)
      for (Eigen::Index o = 0; o < out_cols; ++o)
        (*din)(s, argmax_[static_cast<std::size_t>(s * out_cols + o)]) += dout(s, o);
  }

 private:
  Grid g_;
  int out_h_;
  int out_w_;
  std::vector<int> argmax_;
};

template <typename T>
class DropoutOp final : public LayerOp<T> {
 public:
  explicit DropoutOp(double keep) : keep_(keep) {}

  void forward(const Matrix<T>& in, Matrix<T>& out, Mode mode, Rng* rng) override {
    last_mode_ = mode;
    if (mode == Mode::inference) {
      out = in;
      return;
    }
    if (mode == Mode::training) {
      if (!rng) throw std::invalid_argument("dropout in training mode needs an rng");
      std::bernoulli_distribution keep(keep_);
      const T scale = static_cast<T>(1.0 / keep_);
      mask_.resize(in.rows(), in.cols());
      for (Eigen::Index i = 0; i < mask_.size(); ++i) mask_.data()[i] = keep(*rng) ? scale : T(0);
    } else if (mask_.rows() != in.rows() || mask_.cols() != in.cols()) {
      throw std::logic_error("dropout: no stored mask matches this batch");
    }
    out = in.cwiseProduct(mask_);
  }

  void backward(const Matrix<T>&, const Matrix<T>&, Matrix<T>& dout, Matrix<T>* din,
                Matrix<T>*) override {
    if (!din) return;
    if (last_mode_ == Mode::inference)
      *din = dout;
    else
      *din = dout.cwiseProduct(mask_);
  }

 private:
  double keep_;
  Mode last_mode_ = Mode::inference;
  Matrix<T> mask_;
};

template <typename T>
class EmbeddingOp final : public LayerOp<T> {
 public:
  EmbeddingOp(int vocab, int length, int dim, const std::string& prefix, const TrainingHyper& h,
              Rng& rng)
      : vocab_(vocab), length_(length), dim_(dim) {
    this->params.push_back(make_param<T>(prefix + ".table", vocab, dim));
    init_gaussian(this->params[0].value, h, rng);
  }

  void forward(const Matrix<T>& in, Matrix<T>& out, Mode, Rng*) override {
    const auto& table = this->params[0].value;
    out.resize(in.rows(), Eigen::Index{length_} * dim_);
    for (Eigen::Index s = 0; s < in.rows(); ++s)
      for (int t = 0; t < length_; ++t)
        out.row(s).segment(Eigen::Index{t} * dim_, dim_) = table.row(token(in(s, t)));
  }

  void backward(const Matrix<T>& in, const Matrix<T>&, Matrix<T>& dout, Matrix<T>* din,
                Matrix<T>* grads) override {
    for (Eigen::Index s = 0; s < in.rows(); ++s)
      for (int t = 0; t < length_; ++t)
        grads[0].row(token(in(s, t))) += dout.row(s).segment(Eigen::Index{t} * dim_, dim_);
    if (din) din->setZero(in.rows(), in.cols());
  }

 private:
  Eigen::Index token(T v) const {
    const auto idx = static_cast<Eigen::Index>(v);
    if (static_cast<T>(idx) != v || idx < 0 || idx >= vocab_)
      throw ShapeError("embedding: token index out of range [0," + std::to_string(vocab_) + ")");
    return idx;
  }

  int vocab_;
  int length_;
  int dim_;
};


}  // namespace

// ---------------------------------------------------------------------------
// Network

template <typename T>
Network<T>::Network(const Chromosome& chromosome, const TaskModality& modality, int num_classes,
                    const TrainingHyper& hyper, Rng& rng)
    : num_classes_(num_classes), hyper_(hyper) {
  hyper.check();
  const ValidityReport report = validate(chromosome, modality, num_classes, LayerBounds::unbounded());
  if (!report.ok()) throw InvalidChromosome("cannot build network: " + report.violations.front());

  Shape shape = input_shape(modality);
  input_width_ = flat_size(shape);
  for (std::size_t i = 0; i < chromosome.layers.size(); ++i) {
    const Layer& layer = chromosome.layers[i];
    const std::string prefix = "layer" + std::to_string(i);
    std::unique_ptr<LayerOp<T>> op = std::visit(
        Overloaded{
            [&](const Conv2D& l) -> std::unique_ptr<LayerOp<T>> {
              const auto& s = std::get<GridShape>(shape);
              return std::make_unique<ConvOp<T>>(
                  Grid{s.height, s.width, s.channels, l.kernel, l.kernel}, l.filters,
                  l.activation, prefix, hyper, rng);
            },
            [&](const Conv1D& l) -> std::unique_ptr<LayerOp<T>> {
              const auto& s = std::get<SeqShape>(shape);
              return std::make_unique<ConvOp<T>>(Grid{s.length, 1, s.channels, l.kernel, 1},
                                                 l.filters, l.activation, prefix, hyper, rng);
            },
            [&](const MaxPool2D& l) -> std::unique_ptr<LayerOp<T>> {
              const auto& s = std::get<GridShape>(shape);
              return std::make_unique<PoolOp<T>>(
                  Grid{s.height, s.width, s.channels, l.kernel, l.kernel});
            },
            [&](const MaxPool1D& l) -> std::unique_ptr<LayerOp<T>> {
              const auto& s = std::get<SeqShape>(shape);
              return std::make_unique<PoolOp<T>>(Grid{s.length, 1, s.channels, l.kernel, 1});
            },
            [&](const Dense& l) -> std::unique_ptr<LayerOp<T>> {
              return std::make_unique<DenseOp<T>>(static_cast<int>(flat_size(shape)), l.units,
                                                  l.activation, prefix, hyper, rng);
            },
            [&](const Dropout& l) -> std::unique_ptr<LayerOp<T>> {
              return std::make_unique<DropoutOp<T>>(l.keep_prob);
            },
            [&](const Embedding& l) -> std::unique_ptr<LayerOp<T>> {
              const auto& m = std::get<Sequence>(modality.kind);
              return std::make_unique<EmbeddingOp<T>>(m.vocab_size, m.max_length, l.output_dim,
                                                      prefix, hyper, rng);
            },
        },
        layer);
    shape = infer_shape(layer, shape);
    ops_.push_back(std::move(op));
  }
  terminal_ = std::get<Dense>(chromosome.layers.back()).activation;
  for (auto& op : ops_)
    for (auto& p : op->params) params_.push_back(&p);
}

template <typename T>
Network<T>::~Network() = default;
template <typename T>
Network<T>::Network(Network&&) noexcept = default;
template <typename T>
Network<T>& Network<T>::operator=(Network&&) noexcept = default;

template <typename T>
std::int64_t Network<T>::parameter_count() const noexcept {
  std::int64_t n = 0;
  for (const auto* p : params_) n += p->value.size();
  return n;
}

template <typename T>
Matrix<T> Network<T>::forward(const Matrix<T>& batch, Mode mode, Rng* rng) {
  if (batch.cols() != input_width_)
    throw ShapeError("network input width " + std::to_string(input_width_) + " but batch has " +
                     std::to_string(batch.cols()) + " columns");
  activations_.resize(ops_.size() + 1);
  activations_[0] = batch;
  for (std::size_t i = 0; i < ops_.size(); ++i)
    ops_[i]->forward(activations_[i], activations_[i + 1], mode, rng);
  return activations_.back();
}

template <typename T>
double Network<T>::loss(const Matrix<T>& batch, const Matrix<T>& one_hot, Mode mode, Rng* rng) {
  const Matrix<T> out = forward(batch, mode, rng);
  return categorical_cross_entropy<T>(out, one_hot, terminal_, hyper_.prob_clamp, nullptr);
}

template <typename T>
LossAndGradients<T> Network<T>::loss_and_gradients(const Matrix<T>& batch,
                                                   const Matrix<T>& one_hot, Mode mode, Rng* rng) {
  forward(batch, mode, rng);
  LossAndGradients<T> result;
  Matrix<T> d;
  result.loss =
      categorical_cross_entropy<T>(activations_.back(), one_hot, terminal_, hyper_.prob_clamp, &d);
  if (!std::isfinite(result.loss)) throw NonFiniteLoss("non-finite training loss");

  result.gradients.reserve(params_.size());
  for (const auto* p : params_)
    result.gradients.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));

  std::size_t offset = result.gradients.size();
  for (std::size_t i = ops_.size(); i-- > 0;) {
    offset -= ops_[i]->params.size();
    Matrix<T> din;
    ops_[i]->backward(activations_[i], activations_[i + 1], d, i > 0 ? &din : nullptr,
                      result.gradients.data() + offset);
    d = std::move(din);
  }
  return result;
}

template <typename T>
void Network<T>::adam_step(const Gradients<T>& gradients, double learning_rate,
                           std::int64_t step) {
  if (step < 1) throw std::invalid_argument("adam_step: step must be >= 1");
  if (gradients.size() != params_.size())
    throw std::invalid_argument("adam_step: gradient count does not match parameters");
  const T b1 = static_cast<T>(hyper_.adam_beta1);
  const T b2 = static_cast<T>(hyper_.adam_beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(hyper_.adam_beta1, static_cast<double>(step)));
  const T c2 = static_cast<T>(1.0 - std::pow(hyper_.adam_beta2, static_cast<double>(step)));
  const T lr = static_cast<T>(learning_rate);
  const T eps = static_cast<T>(hyper_.adam_epsilon);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter<T>& p = *params_[i];
    const auto g = gradients[i].array();
    p.adam_m.array() = b1 * p.adam_m.array() + (T(1) - b1) * g;
    p.adam_v.array() = b2 * p.adam_v.array() + (T(1) - b2) * g.square();
    p.value.array() -= lr * (p.adam_m.array() / c1) / ((p.adam_v.array() / c2).sqrt() + eps);
  }
}

template class Network<float>;
template class Network<double>;

template double categorical_cross_entropy<float>(const Matrix<float>&, const Matrix<float>&,
                                                 Activation, double, Matrix<float>*);
template double categorical_cross_entropy<double>(const Matrix<double>&, const Matrix<double>&,
                                                  Activation, double, Matrix<double>*);
template void activate<float>(Activation, const Matrix<float>&, Matrix<float>&, const float*, int);
template void activate<double>(Activation, const Matrix<double>&, Matrix<double>&, const double*,
                               int);

}  // namespace archevo::nn
