#pragma once

// Shared test oracles: finite-difference gradient checks and small victims.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "advspec/attacks.hpp"
#include "advspec/model.hpp"

namespace advspec::testing {

struct LayerCheck {
  std::string layer;
  int coordinates = 0;
  double max_relative_error = 0.0;
};

inline double relative_error(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

/// Layer type of a parameter tensor name.
inline std::string layer_type(const std::string& tensor) {
  if (tensor.starts_with("stem")) return "stem_conv";
  if (tensor.find(".proj") != std::string::npos) return "projection_shortcut";
  if (tensor.find(".conv") != std::string::npos) return "residual_conv";
  return "linear_head";
}

/// Random model with non-zero biases and a random input in [0, 255].
struct GradFixture {
  MicroResNet model;
  std::vector<double> x;
  int label = 1;
};

inline GradFixture make_grad_fixture(std::uint64_t seed, int size = 16) {
  ModelArch a;
  a.input_height = a.input_width = size;
  GradFixture f{init_model(a, seed), {}, 1};
  Rng rng(seed + 1);
  auto p = f.model.parameters();
  for (const auto& t : f.model.tensors())
    if (t.name.ends_with(".bias"))
      for (std::size_t i = 0; i < t.size; ++i) p[t.offset + i] = rng.uniform(-0.2, 0.2);
  f.model.set_input_normalization(120.0, 60.0);
  f.x.resize(static_cast<std::size_t>(size) * size);
  for (double& v : f.x) v = rng.uniform(0.0, 255.0);
  return f;
}

/// Central differences (float64, step h) against the analytic gradients of
/// the cross-entropy loss: `per_layer` random coordinates of the input and of
/// every layer type's parameters.
inline std::vector<LayerCheck> gradient_check(std::uint64_t seed, int per_layer = 24, double h = 1e-4) {
  auto f = make_grad_fixture(seed);
  auto& m = f.model;
  Rng rng(seed + 2);
  std::vector<LayerCheck> out;

  auto loss_at = [&](std::span<const double> x) { return cross_entropy(m.logits(x), f.label); };
  {
    const auto logits = m.logits(f.x);
    auto seed_vec = softmax(logits);
    seed_vec[f.label] -= 1.0;
    std::vector<double> g(f.x.size());
    m.logits_backward(f.x, seed_vec, g);
    LayerCheck c{"input", 0, 0.0};
    for (int k = 0; k < per_layer; ++k) {
      const auto i = static_cast<std::size_t>(rng.below(f.x.size()));
      auto xp = f.x, xm = f.x;
      xp[i] += h;
      xm[i] -= h;
      const double fd = (loss_at(xp) - loss_at(xm)) / (2.0 * h);
      c.max_relative_error = std::max(c.max_relative_error, relative_error(g[i], fd));
      ++c.coordinates;
    }
    out.push_back(c);
  }

  std::vector<double> grad(m.parameter_count(), 0.0);
  m.loss_and_param_grad(f.x, f.label, grad);
  std::map<std::string, std::vector<std::size_t>> by_type;
  for (const auto& t : m.tensors())
    for (std::size_t i = 0; i < t.size; ++i) by_type[layer_type(t.name)].push_back(t.offset + i);
  auto params = m.parameters();
  for (const auto& [type, idx] : by_type) {
    LayerCheck c{type, 0, 0.0};
    for (int k = 0; k < per_layer; ++k) {
      const auto p = idx[rng.below(idx.size())];
      const double saved = params[p];
      params[p] = saved + h;
      const double up = loss_at(f.x);
      params[p] = saved - h;
      const double down = loss_at(f.x);
      params[p] = saved;
      c.max_relative_error = std::max(c.max_relative_error, relative_error(grad[p], (up - down) / (2.0 * h)));
      ++c.coordinates;
    }
    out.push_back(c);
  }
  return out;
}

/// Two-class linear victim with logits (f/2, -f/2) for the decision function
/// f(x) = w.x + b.
inline LinearClassifier binary_linear(const std::vector<double>& w, double b) {
  std::vector<double> weights(2 * w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    weights[i] = 0.5 * w[i];
    weights[w.size() + i] = -0.5 * w[i];
  }
  return LinearClassifier(w.size(), weights, {0.5 * b, -0.5 * b});
}

/// Binary linear victim with a clean point of label 0 whose distance to the
/// decision hyperplane is `distance()` pixels, far enough from the box edges
/// that the nearest boundary point is interior.
struct LinearProblem {
  std::vector<double> w;
  double b = 0.0;
  std::vector<double> x;
  LinearClassifier model;

  double f() const {
    double v = b;
    for (std::size_t i = 0; i < w.size(); ++i) v += w[i] * x[i];
    return v;
  }
  double w_norm2() const {
    double v = 0.0;
    for (double c : w) v += c * c;
    return v;
  }
  double distance() const { return std::abs(f()) / std::sqrt(w_norm2()); }
};

inline LinearProblem make_linear_problem(std::uint64_t seed, std::size_t n = 64) {
  Rng rng(seed);
  std::vector<double> w(n), x(n);
  for (double& v : w) v = 0.01 * rng.normal();
  for (double& v : x) v = rng.uniform(60.0, 195.0);
  double norm = 0.0, dot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    norm += w[i] * w[i];
    dot += w[i] * x[i];
  }
  const double b = rng.uniform(10.0, 30.0) * std::sqrt(norm) - dot;
  return {w, b, x, binary_linear(w, b)};
}

inline double l2_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

/// Violation counts over randomized runs of one attack against small random
/// networks; inputs include pixels pinned at 0 and M.
struct InvariantTally {
  int runs = 0;
  int box = 0;           // some pixel outside [0, M]
  int epsilon_ball = 0;  // fgsm/bim: ||delta||_inf > eps
  int l0 = 0;            // jsma: ||delta||_0 > iterations_used
  int cost = 0;          // reported calls differ from the oracle counter
  int fgsm_cost = 0;     // fgsm: calls != 1
  bool clean() const { return box + epsilon_ball + l0 + cost + fgsm_cost == 0; }
};

inline InvariantTally box_invariants(AttackKind kind, int runs, std::uint64_t seed, double ceiling = 255.0) {
  InvariantTally t;
  Rng rng(seed);
  ModelArch a;
  a.input_height = a.input_width = 8;
  a.classes = 3;
  a.stem_width = 4;
  a.block_widths = {4, 8};
  std::vector<MicroResNet> models;
  for (int m = 0; m < 4; ++m) {
    models.push_back(init_model(a, seed * 31 + m));
    models.back().set_input_normalization(ceiling / 2, ceiling / 4);
  }
  std::vector<double> x(64);
  for (int run = 0; run < runs; ++run) {
    const auto& model = models[run % models.size()];
    for (double& v : x) {
      const double u = rng.uniform();
      v = u < 0.1 ? 0.0 : (u < 0.2 ? ceiling : rng.uniform(0.0, ceiling));
    }
    GradientOracle oracle(model, ceiling);
    const int label = oracle.predict(x);
    int target = static_cast<int>(rng.below(2));
    if (target >= label) ++target;
    AttackSpec spec;
    spec.kind = kind;
    const double eps = rng.uniform(0.0, ceiling);
    spec.fgsm.epsilon = eps;
    spec.fgsm.norm = rng.uniform() < 0.5 ? Norm::Linf : Norm::L2;
    spec.fgsm.search_steps = 1 + static_cast<int>(rng.below(8));
    spec.targeted = rng.uniform() < 0.5;
    spec.bim.epsilon = eps;
    spec.bim.step = rng.uniform(0.01, 1.0) * (eps > 0.0 ? eps : 1.0);
    spec.bim.max_iters = 1 + static_cast<int>(rng.below(10));
    spec.jsma.gamma = rng.uniform(0.01, 1.0);
    spec.jsma.theta = rng.uniform(1.0, ceiling);
    spec.jsma.iter_cap = 1 + static_cast<int>(rng.below(30));
    spec.jsma.polarity = rng.uniform() < 0.5 ? JsmaPolarity::Increase : JsmaPolarity::Both;
    spec.cw.search_steps = 1 + static_cast<int>(rng.below(3));
    spec.cw.iters_per_step = 5 + static_cast<int>(rng.below(30));
    spec.cw.learning_rate = rng.uniform(0.01, 0.5);
    spec.cw.c_init = std::exp(rng.uniform(std::log(1e-2), std::log(1e2)));
    spec.deepfool.max_iters = 1 + static_cast<int>(rng.below(20));
    spec.deepfool.overshoot = rng.uniform(0.0, 0.5);
    spec.deepfool.norm = rng.uniform() < 0.5 ? Norm::L2 : Norm::Linf;
    spec.lbfgs.inner_iters = 5 + static_cast<int>(rng.below(15));
    spec.lbfgs.grid_steps = 2;
    spec.lbfgs.refine_steps = 1;
    const BatchItem item{x, label};
    const auto results = run_attack(oracle, item, spec, target);
    std::uint64_t reported = 0;
    for (const auto& r : results) {
      reported += r.gradient_calls;
      ++t.runs;
      bool in_box = r.x_adv.size() == x.size();
      double linf = 0.0;
      std::size_t l0 = 0;
      for (std::size_t i = 0; in_box && i < x.size(); ++i) {
        in_box = r.x_adv[i] >= 0.0 && r.x_adv[i] <= ceiling;
        linf = std::max(linf, std::abs(r.x_adv[i] - x[i]));
        l0 += r.x_adv[i] != x[i];
      }
      t.box += !in_box;
      const bool linf_ball = kind == AttackKind::BimA || kind == AttackKind::BimB ||
                             (kind == AttackKind::Fgsm && spec.fgsm.norm == Norm::Linf);
      if (linf_ball) t.epsilon_ball += linf > eps;
      if (kind == AttackKind::Jsma) t.l0 += l0 > static_cast<std::size_t>(r.iterations_used);
      if (kind == AttackKind::Fgsm) t.fgsm_cost += r.gradient_calls != 1;
    }
    t.cost += reported != oracle.calls();
  }
  return t;
}

}  // namespace advspec::testing
