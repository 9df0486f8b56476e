#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "advspec/model.hpp"

namespace advspec {

/// Loss whose input-gradient an attack requests.
struct Objective {
  enum class Kind { CrossEntropy, CarliniWagner };

  Kind kind = Kind::CrossEntropy;
  int label = 0;          // true label, or target when `targeted`
  bool targeted = false;  // only meaningful for CarliniWagner
  double kappa = 0.0;

  static Objective cross_entropy(int label) { return {Kind::CrossEntropy, label, false, 0.0}; }
  /// max(max_{i != t} G_i - G_t, -kappa)
  static Objective cw_targeted(int target, double kappa) { return {Kind::CarliniWagner, target, true, kappa}; }
  /// max(G_l - max_{i != l} G_i, -kappa)
  static Objective cw_untargeted(int label, double kappa) { return {Kind::CarliniWagner, label, false, kappa}; }
};

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
  std::vector<double> logits;
};

/// Evaluates the Carlini-Wagner margin and the logit seed of its gradient.
inline double cw_margin(std::span<const double> logits, const Objective& obj, std::vector<double>* seed = nullptr) {
  const int l = obj.label;
  int other = -1;
  for (int i = 0; i < static_cast<int>(logits.size()); ++i)
    if (i != l && (other < 0 || logits[i] > logits[other])) other = i;
  const double margin = obj.targeted ? logits[other] - logits[l] : logits[l] - logits[other];
  const bool active = margin > -obj.kappa;
  if (seed) {
    seed->assign(logits.size(), 0.0);
    if (active) {
      (*seed)[other] += obj.targeted ? 1.0 : -1.0;
      (*seed)[l] += obj.targeted ? -1.0 : 1.0;
    }
  }
  return active ? margin : -obj.kappa;
}

/// The victim's query surface. Forward queries are free; every call that
/// returns an input-gradient increments the callback counter by exactly one.
class GradientOracle {
 public:
  explicit GradientOracle(const Classifier& model, double ceiling = 255.0) : model_(&model), ceiling_(ceiling) {}
  GradientOracle(const GradientOracle&) = delete;
  GradientOracle& operator=(const GradientOracle&) = delete;

  const Classifier& model() const { return *model_; }
  double ceiling() const { return ceiling_; }
  int num_classes() const { return model_->num_classes(); }
  std::uint64_t calls() const { return calls_.load(std::memory_order_relaxed); }

  std::vector<double> logits(std::span<const double> x) const { return model_->logits(x); }
  int predict(std::span<const double> x) const { return argmax(model_->logits(x)); }

  LossGrad loss_and_input_grad(std::span<const double> x, const Objective& obj) {
    check_label(obj.label);
    check_box(x);
    LossGrad out;
    out.logits = model_->logits(x);
    std::vector<double> seed;
    if (obj.kind == Objective::Kind::CrossEntropy) {
      seed = softmax(out.logits);
      seed[obj.label] -= 1.0;
      out.loss = cross_entropy(out.logits, obj.label);
    } else {
      out.loss = cw_margin(out.logits, obj, &seed);
    }
    out.grad.assign(x.size(), 0.0);
    model_->logits_backward(x, seed, out.grad);
    calls_.fetch_add(1, std::memory_order_relaxed);
    return out;
  }

  /// Gradient of sum_k seed[k] * G_k(x); one callback.
  LossGrad logit_combination_grad(std::span<const double> x, std::span<const double> seed) {
    if (seed.size() != static_cast<std::size_t>(num_classes())) throw std::invalid_argument("oracle: seed size");
    check_box(x);
    LossGrad out;
    out.grad.assign(x.size(), 0.0);
    out.logits = model_->logits_backward(x, seed, out.grad);
    for (std::size_t k = 0; k < seed.size(); ++k) out.loss += seed[k] * out.logits[k];
    calls_.fetch_add(1, std::memory_order_relaxed);
    return out;
  }

 private:
  void check_label(int label) const {
    if (label < 0 || label >= num_classes()) throw std::invalid_argument("oracle: label index out of range");
  }
  void check_box(std::span<const double> x) const {
    const double tol = 1e-9 * ceiling_;
    for (double v : x)
      if (!(v >= -tol && v <= ceiling_ + tol)) throw std::invalid_argument("oracle: input outside [0, M]");
  }

  const Classifier* model_;
  double ceiling_;
  std::atomic<std::uint64_t> calls_{0};
};

}  // namespace advspec
