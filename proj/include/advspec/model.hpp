#pragma once

// Victim classifiers. Every classifier exposes logits and a vector-Jacobian
// product with respect to its input; MicroResNet additionally exposes
// parameter gradients for training.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "advspec/common.hpp"

namespace advspec {

class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual int num_classes() const = 0;
  virtual std::size_t input_size() const = 0;
  virtual std::vector<double> logits(std::span<const double> x) const = 0;

  /// Returns the logits at x and writes d(sum_k seed[k] * logit_k)/dx into grad.
  virtual std::vector<double> logits_backward(std::span<const double> x, std::span<const double> seed,
                                              std::span<double> grad) const = 0;
};

inline std::vector<double> softmax(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += p[i] = std::exp(logits[i] - top);
  for (double& v : p) v /= sum;
  return p;
}

/// -log softmax(logits)[label], computed stably.
inline double cross_entropy(std::span<const double> logits, int label) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - top);
  return std::log(sum) + top - logits[label];
}

/// Index of the largest value; ties go to the lowest index.
inline int argmax(std::span<const double> v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = static_cast<int>(i);
  return best;
}

// ---------------------------------------------------------------------------

/// Affine victim G(x) = W x + b; K x n weights, row-major.
class LinearClassifier final : public Classifier {
 public:
  LinearClassifier(std::size_t inputs, std::vector<double> weights, std::vector<double> bias)
      : inputs_(inputs), weights_(std::move(weights)), bias_(std::move(bias)) {
    if (bias_.size() < 2 || weights_.size() != bias_.size() * inputs_)
      throw ShapeError("linear classifier: weight/bias shape mismatch");
  }

  int num_classes() const override { return static_cast<int>(bias_.size()); }
  std::size_t input_size() const override { return inputs_; }

  std::vector<double> logits(std::span<const double> x) const override {
    if (x.size() != inputs_) throw ShapeError("linear classifier: input size mismatch");
    std::vector<double> g(bias_);
    for (std::size_t k = 0; k < bias_.size(); ++k)
      for (std::size_t i = 0; i < inputs_; ++i) g[k] += weights_[k * inputs_ + i] * x[i];
    return g;
  }

  std::vector<double> logits_backward(std::span<const double> x, std::span<const double> seed,
                                      std::span<double> grad) const override {
    auto g = logits(x);
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t k = 0; k < bias_.size(); ++k)
      for (std::size_t i = 0; i < inputs_; ++i) grad[i] += seed[k] * weights_[k * inputs_ + i];
    return g;
  }

  std::span<const double> weight_row(int k) const { return {weights_.data() + k * inputs_, inputs_}; }
  double bias(int k) const { return bias_[k]; }

 private:
  std::size_t inputs_;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

// ---------------------------------------------------------------------------
// MicroResNet

/// Channel-major activation block.
struct Tensor3 {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor3() = default;
  Tensor3(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, 0.0) {}
  double* plane(int ch) { return v.data() + static_cast<std::size_t>(ch) * h * w; }
  const double* plane(int ch) const { return v.data() + static_cast<std::size_t>(ch) * h * w; }
};

struct ModelArch {
  int input_height = 128;
  int input_width = 128;
  int stem_width = 8;
  int stem_stride = 2;
  int stem_pool = 2;  // average-pool window (and stride) after the stem; 1 disables
  std::vector<int> block_widths{8, 16};
  int classes = 4;

  void validate() const {
    if (classes < 2) throw ConfigError("model: need at least two classes");
    if (input_height < 1 || input_width < 1) throw ConfigError("model: invalid input shape");
    if (stem_width < 1 || stem_stride < 1 || stem_pool < 1) throw ConfigError("model: invalid stem");
    for (int w : block_widths)
      if (w < 1) throw ConfigError("model: invalid block width");
  }
};

struct ParamTensor {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

enum class InitMode { He, Zero };

class MicroResNet final : public Classifier {
 public:
  struct Conv {
    int in_c, out_c, k, stride, pad;
    std::size_t w, b;  // offsets into the parameter vector
  };
  struct Block {
    Conv conv1, conv2;
    bool projected;
    Conv proj;
  };

  explicit MicroResNet(ModelArch arch) : arch_(std::move(arch)) {
    arch_.validate();
    stem_ = add_conv("stem", 1, arch_.stem_width, 3, arch_.stem_stride);
    int in_c = arch_.stem_width;
    for (std::size_t i = 0; i < arch_.block_widths.size(); ++i) {
      const int out_c = arch_.block_widths[i];
      const int stride = i == 0 ? 1 : 2;
      const std::string p = "block" + std::to_string(i);
      Block b{};
      b.conv1 = add_conv(p + ".conv1", in_c, out_c, 3, stride);
      b.conv2 = add_conv(p + ".conv2", out_c, out_c, 3, 1);
      b.projected = stride != 1 || in_c != out_c;
      if (b.projected) b.proj = add_conv(p + ".proj", in_c, out_c, 1, stride);
      blocks_.push_back(b);
      in_c = out_c;
    }
    features_ = in_c;
    head_w_ = add_param("head.weight", {arch_.classes, features_});
    head_b_ = add_param("head.bias", {arch_.classes});
    params_.assign(param_count_, 0.0);
    // Dry-run the spatial pipeline so bad shapes fail at construction.
    int h = arch_.input_height, w = arch_.input_width;
    shape_after(h, w);
    if (h < 1 || w < 1) throw ConfigError("model: input too small for the architecture");
  }

  const ModelArch& arch() const { return arch_; }
  int num_classes() const override { return arch_.classes; }
  std::size_t input_size() const override {
    return static_cast<std::size_t>(arch_.input_height) * arch_.input_width;
  }

  std::size_t parameter_count() const { return param_count_; }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  const std::vector<ParamTensor>& tensors() const { return tensors_; }

  /// Standardization folded into the network: z = (x - mean) / stddev.
  void set_input_normalization(double mean, double stddev) {
    if (!(stddev > 0.0)) throw std::invalid_argument("model: stddev must be positive");
    mean_ = mean;
    std_ = stddev;
  }
  double input_mean() const { return mean_; }
  double input_stddev() const { return std_; }

  void initialize(std::uint64_t seed, InitMode mode = InitMode::He) {
    std::fill(params_.begin(), params_.end(), 0.0);
    if (mode == InitMode::Zero) return;
    Rng rng(seed);
    auto fill_conv = [&](const Conv& c, double gain) {
      const double sd = gain * std::sqrt(2.0 / (c.in_c * c.k * c.k));
      const std::size_t n = static_cast<std::size_t>(c.out_c) * c.in_c * c.k * c.k;
      for (std::size_t i = 0; i < n; ++i) params_[c.w + i] = sd * rng.normal();
    };
    fill_conv(stem_, 1.0);
    for (const auto& b : blocks_) {
      fill_conv(b.conv1, 1.0);
      fill_conv(b.conv2, 0.5);
      if (b.projected) fill_conv(b.proj, 1.0);
    }
    const double sd = std::sqrt(1.0 / features_);
    for (int i = 0; i < arch_.classes * features_; ++i) params_[head_w_ + i] = sd * rng.normal();
  }

  std::vector<double> logits(std::span<const double> x) const override {
    Trace t;
    forward(x, t);
    return t.logits;
  }

  std::vector<double> logits_backward(std::span<const double> x, std::span<const double> seed,
                                      std::span<double> grad) const override {
    Trace t;
    forward(x, t);
    backward(t, seed, grad, {});
    return t.logits;
  }

  /// Cross-entropy at (x, label); accumulates d loss / d params into param_grad.
  double loss_and_param_grad(std::span<const double> x, int label, std::span<double> param_grad) const {
    Trace t;
    forward(x, t);
    const auto p = softmax(t.logits);
    std::vector<double> seed(p);
    seed[label] -= 1.0;
    backward(t, seed, {}, param_grad);
    return cross_entropy(t.logits, label);
  }

 private:
  struct BlockTrace {
    Tensor3 in, mid, out;  // mid = relu(conv1(in)), out = relu(conv2(mid) + shortcut)
  };
  struct Trace {
    Tensor3 input;  // standardized
    Tensor3 stem;   // relu(stem conv)
    Tensor3 pooled;
    std::vector<BlockTrace> blocks;
    std::vector<double> features;
    std::vector<double> logits;
  };

  std::size_t add_param(std::string name, std::vector<int> shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    tensors_.push_back({std::move(name), std::move(shape), param_count_, n});
    param_count_ += n;
    return param_count_ - n;
  }

  Conv add_conv(const std::string& name, int in_c, int out_c, int k, int stride) {
    Conv c{in_c, out_c, k, stride, k / 2, 0, 0};
    c.w = add_param(name + ".weight", {out_c, in_c, k, k});
    c.b = add_param(name + ".bias", {out_c});
    return c;
  }

  static int conv_out(int n, const Conv& c) { return (n + 2 * c.pad - c.k) / c.stride + 1; }

  void shape_after(int& h, int& w) const {
    h = conv_out(h, stem_) / arch_.stem_pool;
    w = conv_out(w, stem_) / arch_.stem_pool;
    for (const auto& b : blocks_) {
      h = conv_out(h, b.conv1);
      w = conv_out(w, b.conv1);
    }
  }

  // Output range [lo, hi) of positions o whose tap o*stride + off lands inside [0, n).
  static std::pair<int, int> valid_range(int out_n, int n, int stride, int off) {
    int lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
    int hi = (n - 1 - off) < 0 ? 0 : (n - 1 - off) / stride + 1;
    return {std::min(lo, out_n), std::min(hi, out_n)};
  }

  Tensor3 conv_forward(const Tensor3& in, const Conv& c) const {
    Tensor3 out(c.out_c, conv_out(in.h, c), conv_out(in.w, c));
    const double* W = params_.data() + c.w;
    for (int co = 0; co < c.out_c; ++co) {
      double* o = out.plane(co);
      std::fill(o, o + out.h * out.w, params_[c.b + co]);
      for (int ci = 0; ci < c.in_c; ++ci) {
        const double* src = in.plane(ci);
        for (int ky = 0; ky < c.k; ++ky) {
          const auto [ylo, yhi] = valid_range(out.h, in.h, c.stride, ky - c.pad);
          for (int kx = 0; kx < c.k; ++kx) {
            const double wv = W[((co * c.in_c + ci) * c.k + ky) * c.k + kx];
            const auto [xlo, xhi] = valid_range(out.w, in.w, c.stride, kx - c.pad);
            for (int oy = ylo; oy < yhi; ++oy) {
              const double* row = src + (oy * c.stride + ky - c.pad) * in.w + (kx - c.pad);
              double* orow = o + oy * out.w;
              if (c.stride == 1) {
                for (int ox = xlo; ox < xhi; ++ox) orow[ox] += wv * row[ox];
              } else {
                for (int ox = xlo; ox < xhi; ++ox) orow[ox] += wv * row[ox * c.stride];
              }
            }
          }
        }
      }
    }
    return out;
  }

  // din and dparams are optional (empty spans skip that output).
  void conv_backward(const Tensor3& in, const Conv& c, const Tensor3& dout, Tensor3* din,
                     std::span<double> dparams) const {
    const double* W = params_.data() + c.w;
    for (int co = 0; co < c.out_c; ++co) {
      const double* g = dout.plane(co);
      if (!dparams.empty()) {
        double s = 0.0;
        for (int i = 0; i < dout.h * dout.w; ++i) s += g[i];
        dparams[c.b + co] += s;
      }
      for (int ci = 0; ci < c.in_c; ++ci) {
        const double* src = in.plane(ci);
        double* dsrc = din ? din->plane(ci) : nullptr;
        for (int ky = 0; ky < c.k; ++ky) {
          const auto [ylo, yhi] = valid_range(dout.h, in.h, c.stride, ky - c.pad);
          for (int kx = 0; kx < c.k; ++kx) {
            const std::size_t widx = ((co * c.in_c + ci) * c.k + ky) * c.k + kx;
            const double wv = W[widx];
            const auto [xlo, xhi] = valid_range(dout.w, in.w, c.stride, kx - c.pad);
            double acc = 0.0;
            for (int oy = ylo; oy < yhi; ++oy) {
              const std::size_t base = (oy * c.stride + ky - c.pad) * in.w + (kx - c.pad);
              const double* grow = g + oy * dout.w;
              if (!dparams.empty())
                for (int ox = xlo; ox < xhi; ++ox) acc += grow[ox] * src[base + ox * c.stride];
              if (dsrc)
                for (int ox = xlo; ox < xhi; ++ox) dsrc[base + ox * c.stride] += wv * grow[ox];
            }
            if (!dparams.empty()) dparams[c.w + widx] += acc;
          }
        }
      }
    }
  }

  static void relu_inplace(Tensor3& t) {
    for (double& v : t.v) v = v > 0.0 ? v : 0.0;
  }

  // Zeroes gradient where the forward activation was clamped.
  static void relu_mask(const Tensor3& activated, Tensor3& grad) {
    for (std::size_t i = 0; i < grad.v.size(); ++i)
      if (activated.v[i] <= 0.0) grad.v[i] = 0.0;
  }

  Tensor3 avg_pool(const Tensor3& in) const {
    const int p = arch_.stem_pool;
    if (p == 1) return in;
    Tensor3 out(in.c, in.h / p, in.w / p);
    const double inv = 1.0 / (p * p);
    for (int ch = 0; ch < in.c; ++ch)
      for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x) {
          double s = 0.0;
          for (int dy = 0; dy < p; ++dy)
            for (int dx = 0; dx < p; ++dx) s += in.plane(ch)[(y * p + dy) * in.w + x * p + dx];
          out.plane(ch)[y * out.w + x] = s * inv;
        }
    return out;
  }

  Tensor3 avg_pool_backward(const Tensor3& dout, int in_h, int in_w) const {
    const int p = arch_.stem_pool;
    if (p == 1) return dout;
    Tensor3 din(dout.c, in_h, in_w);
    const double inv = 1.0 / (p * p);
    for (int ch = 0; ch < dout.c; ++ch)
      for (int y = 0; y < dout.h; ++y)
        for (int x = 0; x < dout.w; ++x) {
          const double g = dout.plane(ch)[y * dout.w + x] * inv;
          for (int dy = 0; dy < p; ++dy)
            for (int dx = 0; dx < p; ++dx) din.plane(ch)[(y * p + dy) * in_w + x * p + dx] += g;
        }
    return din;
  }

  void forward(std::span<const double> x, Trace& t) const {
    if (x.size() != input_size()) throw ShapeError("model: input shape does not match the stem");
    t.input = Tensor3(1, arch_.input_height, arch_.input_width);
    const double inv = 1.0 / std_;
    for (std::size_t i = 0; i < x.size(); ++i) t.input.v[i] = (x[i] - mean_) * inv;
    t.stem = conv_forward(t.input, stem_);
    relu_inplace(t.stem);
    t.pooled = avg_pool(t.stem);
    const Tensor3* cur = &t.pooled;
    t.blocks.resize(blocks_.size());
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const Block& b = blocks_[i];
      BlockTrace& bt = t.blocks[i];
      bt.in = *cur;
      bt.mid = conv_forward(bt.in, b.conv1);
      relu_inplace(bt.mid);
      bt.out = conv_forward(bt.mid, b.conv2);
      if (b.projected) {
        const Tensor3 s = conv_forward(bt.in, b.proj);
        for (std::size_t j = 0; j < s.v.size(); ++j) bt.out.v[j] += s.v[j];
      } else {
        for (std::size_t j = 0; j < bt.in.v.size(); ++j) bt.out.v[j] += bt.in.v[j];
      }
      relu_inplace(bt.out);
      cur = &bt.out;
    }
    t.features.assign(features_, 0.0);
    const double area = static_cast<double>(cur->h) * cur->w;
    for (int ch = 0; ch < cur->c; ++ch) {
      const double* p = cur->plane(ch);
      t.features[ch] = std::accumulate(p, p + cur->h * cur->w, 0.0) / area;
    }
    t.logits.assign(arch_.classes, 0.0);
    for (int k = 0; k < arch_.classes; ++k) {
      double s = params_[head_b_ + k];
      for (int f = 0; f < features_; ++f) s += params_[head_w_ + k * features_ + f] * t.features[f];
      t.logits[k] = s;
    }
  }

  void backward(const Trace& t, std::span<const double> seed, std::span<double> dx, std::span<double> dparams) const {
    const bool want_params = !dparams.empty();
    std::vector<double> dfeat(features_, 0.0);
    for (int k = 0; k < arch_.classes; ++k) {
      if (want_params) {
        dparams[head_b_ + k] += seed[k];
        for (int f = 0; f < features_; ++f) dparams[head_w_ + k * features_ + f] += seed[k] * t.features[f];
      }
      for (int f = 0; f < features_; ++f) dfeat[f] += seed[k] * params_[head_w_ + k * features_ + f];
    }
    const Tensor3& last = t.blocks.empty() ? t.pooled : t.blocks.back().out;
    Tensor3 g(last.c, last.h, last.w);
    const double area = static_cast<double>(last.h) * last.w;
    for (int ch = 0; ch < last.c; ++ch) std::fill(g.plane(ch), g.plane(ch) + last.h * last.w, dfeat[ch] / area);

    for (std::size_t i = blocks_.size(); i-- > 0;) {
      const Block& b = blocks_[i];
      const BlockTrace& bt = t.blocks[i];
      relu_mask(bt.out, g);
      Tensor3 dmid(bt.mid.c, bt.mid.h, bt.mid.w);
      conv_backward(bt.mid, b.conv2, g, &dmid, dparams);
      relu_mask(bt.mid, dmid);
      Tensor3 din(bt.in.c, bt.in.h, bt.in.w);
      conv_backward(bt.in, b.conv1, dmid, &din, dparams);
      if (b.projected) {
        conv_backward(bt.in, b.proj, g, &din, dparams);
      } else {
        for (std::size_t j = 0; j < din.v.size(); ++j) din.v[j] += g.v[j];
      }
      g = std::move(din);
    }
    Tensor3 dstem = avg_pool_backward(g, t.stem.h, t.stem.w);
    relu_mask(t.stem, dstem);

    // Parameter-only passes skip the stem's input gradient.
    Tensor3 in_grad(1, arch_.input_height, arch_.input_width);
    conv_backward(t.input, stem_, dstem, dx.empty() ? nullptr : &in_grad, dparams);
    if (!dx.empty()) {
      const double inv = 1.0 / std_;
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = in_grad.v[i] * inv;
    }
  }

  ModelArch arch_;
  Conv stem_{};
  std::vector<Block> blocks_;
  int features_ = 0;
  std::size_t head_w_ = 0, head_b_ = 0;
  std::vector<ParamTensor> tensors_;
  std::size_t param_count_ = 0;
  std::vector<double> params_;
  double mean_ = 0.0;
  double std_ = 1.0;
};

/// Builds a model with He fan-in initialization (or all zeros) from `seed`.
inline MicroResNet init_model(const ModelArch& arch, std::uint64_t seed, InitMode mode = InitMode::He) {
  MicroResNet m(arch);
  m.initialize(seed, mode);
  return m;
}

}  // namespace advspec
