#pragma once

// Gradient-based attacks on a GradientOracle inside the [0, M] box.
//
// Every attack returns an AttackResult whose norms are computed from
// x_adv - x and whose gradient_calls is the oracle counter delta observed
// over the run.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "advspec/common.hpp"
#include "advspec/lbfgs.hpp"
#include "advspec/oracle.hpp"

namespace advspec {

enum class Norm { Linf, L2 };

struct AttackResult {
  std::string attack;
  std::vector<double> x_adv;
  bool success = false;
  int true_label = 0;
  std::optional<int> target_label;
  int predicted_label = 0;
  std::size_t l0 = 0;
  double l2 = 0.0;
  double linf = 0.0;
  std::uint64_t gradient_calls = 0;
  int iterations_used = 0;
  bool degenerate = false;
  std::string note;  // failure reason, if any
  std::size_t item = 0;  // index within the batch
};

/// Elementwise min{M, x + eps, max{0, x - eps, x_cand}}.
inline std::vector<double> clip_to_box(std::span<const double> x_cand, std::span<const double> x_orig, double eps,
                                       double ceiling) {
  if (x_cand.size() != x_orig.size()) throw ShapeError("clip_to_box: shape mismatch");
  std::vector<double> out(x_cand.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    // x +- eps rounded toward x, so |out - x| <= eps holds in floating point
    double up = x_orig[i] + eps, down = x_orig[i] - eps;
    while (up - x_orig[i] > eps) up = std::nextafter(up, -INFINITY);
    while (x_orig[i] - down > eps) down = std::nextafter(down, INFINITY);
    out[i] = std::min({ceiling, up, std::max({0.0, down, x_cand[i]})});
  }
  return out;
}

namespace detail {

/// Fills norms, prediction and success from x_adv; success rule: prediction
/// equals the target for targeted runs, differs from the true label otherwise.
inline void finalize(AttackResult& r, const GradientOracle& oracle, std::span<const double> x,
                     std::uint64_t calls_before) {
  r.l0 = 0;
  r.l2 = 0.0;
  r.linf = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = r.x_adv[i] - x[i];
    if (d != 0.0) ++r.l0;
    r.l2 += d * d;
    r.linf = std::max(r.linf, std::abs(d));
  }
  r.l2 = std::sqrt(r.l2);
  r.predicted_label = oracle.predict(r.x_adv);
  r.success = r.target_label ? r.predicted_label == *r.target_label : r.predicted_label != r.true_label;
  if (r.degenerate) r.success = false;
  r.gradient_calls = oracle.calls() - calls_before;
}

inline bool is_success(const GradientOracle& oracle, std::span<const double> x, int label, std::optional<int> target) {
  const int p = oracle.predict(x);
  return target ? p == *target : p != label;
}

inline bool all_zero(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double g) { return g == 0.0; });
}

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

// ---------------------------------------------------------------------------
// FGSM

struct FgsmParams {
  double epsilon = 0.0;           // pixel units
  Norm norm = Norm::Linf;
  std::optional<int> target;      // set: descend the loss of the target label
  int search_steps = 1;           // > 1: try epsilon * k / search_steps, k = 1.., keep the first success
};

/// One-shot step along sign(grad) (l_inf) or grad / ||grad||_2 (l2), clipped
/// to [0, M] and, for l_inf, to the epsilon box. Exactly one gradient call;
/// with search_steps > 1 the step length is swept up to epsilon along that
/// single gradient using forward passes only.
inline AttackResult fgsm(GradientOracle& oracle, std::span<const double> x, int label, const FgsmParams& p) {
  if (p.epsilon < 0.0) throw std::invalid_argument("fgsm: epsilon must be >= 0");
  if (p.search_steps < 1) throw std::invalid_argument("fgsm: search_steps must be >= 1");
  AttackResult r;
  r.attack = "fgsm";
  r.true_label = label;
  r.target_label = p.target;
  const auto before = oracle.calls();
  const int loss_label = p.target.value_or(label);
  const double dir = p.target ? -1.0 : 1.0;
  const auto lg = oracle.loss_and_input_grad(x, Objective::cross_entropy(loss_label));
  r.iterations_used = 1;
  if (detail::all_zero(lg.grad)) {
    r.x_adv.assign(x.begin(), x.end());
    r.degenerate = true;
    r.note = "zero gradient";
    detail::finalize(r, oracle, x, before);
    return r;
  }
  std::vector<double> dirv(x.size());
  if (p.norm == Norm::Linf) {
    for (std::size_t i = 0; i < x.size(); ++i) dirv[i] = dir * detail::sign(lg.grad[i]);
  } else {
    double nrm = 0.0;
    for (double g : lg.grad) nrm += g * g;
    nrm = std::sqrt(nrm);
    for (std::size_t i = 0; i < x.size(); ++i) dirv[i] = dir * lg.grad[i] / nrm;
  }
  std::vector<double> cand(x.size());
  for (int k = 1; k <= p.search_steps; ++k) {
    const double eps = k == p.search_steps ? p.epsilon : p.epsilon * k / p.search_steps;
    for (std::size_t i = 0; i < x.size(); ++i) cand[i] = x[i] + eps * dirv[i];
    r.x_adv = clip_to_box(cand, x, p.norm == Norm::Linf ? eps : std::numeric_limits<double>::infinity(),
                          oracle.ceiling());
    if (k < p.search_steps && detail::is_success(oracle, r.x_adv, label, p.target)) break;
  }
  detail::finalize(r, oracle, x, before);
  return r;
}

// ---------------------------------------------------------------------------
// BIM

enum class BimVariant { A, B };

struct BimParams {
  double epsilon = 0.0;  // pixel units
  double step = 0.0;     // alpha, pixel units
  int max_iters = 10;
  BimVariant variant = BimVariant::A;
};

/// x_{n+1} = clip_{x,eps}(x_n + alpha * sign(grad J(x_n, l))). Variant A stops
/// at the first adversarial iterate, variant B always runs max_iters.
inline AttackResult bim(GradientOracle& oracle, std::span<const double> x, int label, const BimParams& p) {
  if (!(p.step > 0.0) || p.max_iters < 1) throw std::invalid_argument("bim: need step > 0 and max_iters >= 1");
  if (p.epsilon < 0.0) throw std::invalid_argument("bim: epsilon must be >= 0");
  AttackResult r;
  r.attack = p.variant == BimVariant::A ? "bim_a" : "bim_b";
  r.true_label = label;
  const auto before = oracle.calls();
  std::vector<double> cur(x.begin(), x.end()), cand(x.size());
  for (int it = 0; it < p.max_iters; ++it) {
    const auto lg = oracle.loss_and_input_grad(cur, Objective::cross_entropy(label));
    ++r.iterations_used;
    if (detail::all_zero(lg.grad)) {
      r.degenerate = true;
      r.note = "zero gradient";
      break;
    }
    for (std::size_t i = 0; i < x.size(); ++i) cand[i] = cur[i] + p.step * detail::sign(lg.grad[i]);
    cur = clip_to_box(cand, x, p.epsilon, oracle.ceiling());
    if (p.variant == BimVariant::A && oracle.predict(cur) != label) break;
  }
  r.x_adv = std::move(cur);
  detail::finalize(r, oracle, x, before);
  return r;
}

// ---------------------------------------------------------------------------
// JSMA

enum class JsmaPolarity { Increase, Both };

struct JsmaParams {
  int target = 0;
  double gamma = 1.4 / 255.0;  // maximum distortion; total |delta|_1 <= gamma * m * M
  double theta = 255.0;  // change per selected pixel (pixel units)
  int iter_cap = 100;
  JsmaPolarity polarity = JsmaPolarity::Both;
};

/// m * gamma / n, rounded up, at least 1.
inline int jsma_iteration_cap(std::size_t pixels, double gamma, double scaling) {
  if (!(scaling > 0.0)) throw std::invalid_argument("jsma: scaling factor must be positive");
  return std::max(1, static_cast<int>(std::ceil(static_cast<double>(pixels) * gamma / scaling)));
}

struct Saliency {
  std::vector<double> increase;  // alpha * |beta| where alpha >= 0 and beta <= 0, else 0
  std::vector<double> decrease;  // |alpha| * beta where alpha <= 0 and beta >= 0, else 0 (Both only)
};

/// Saliency of every pixel toward `target` from the per-class logit
/// gradients, with alpha = dG_t/dx_i and beta = sum_{j != t} dG_j/dx_i.
inline Saliency jsma_saliency(const std::vector<std::vector<double>>& jacobian, int target,
                              JsmaPolarity polarity = JsmaPolarity::Increase) {
  const std::size_t n = jacobian.front().size();
  Saliency s;
  s.increase.assign(n, 0.0);
  if (polarity == JsmaPolarity::Both) s.decrease.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = jacobian[target][i];
    double b = 0.0;
    for (std::size_t j = 0; j < jacobian.size(); ++j)
      if (static_cast<int>(j) != target) b += jacobian[j][i];
    if (a >= 0.0 && b <= 0.0) s.increase[i] = a * std::abs(b);
    if (polarity == JsmaPolarity::Both && a <= 0.0 && b >= 0.0) s.decrease[i] = std::abs(a) * b;
  }
  return s;
}

/// Greedy single-pixel JSMA. Each iteration spends K callbacks on the
/// Jacobian and moves the most salient pixel by theta (up, or down as well
/// under JsmaPolarity::Both), clamped to [0, M]. A moved pixel that lands on
/// a bound leaves the search domain.
inline AttackResult jsma(GradientOracle& oracle, std::span<const double> x, int label, const JsmaParams& p) {
  const int k_classes = oracle.num_classes();
  if (p.target < 0 || p.target >= k_classes) throw std::invalid_argument("jsma: target out of range");
  if (!(p.theta > 0.0)) throw std::invalid_argument("jsma: theta must be positive");
  if (p.iter_cap < 1) throw std::invalid_argument("jsma: iteration cap must be >= 1");
  if (oracle.predict(x) == p.target) throw std::invalid_argument("jsma: target equals the current prediction");
  AttackResult r;
  r.attack = "jsma";
  r.true_label = label;
  r.target_label = p.target;
  const auto before = oracle.calls();
  const double ceiling = oracle.ceiling();
  const double max_distortion = p.gamma * static_cast<double>(x.size()) * ceiling;
  std::vector<double> cur(x.begin(), x.end());
  std::vector<std::vector<double>> jac(k_classes);
  std::vector<double> seed(k_classes);
  std::vector<char> retired(x.size(), 0);  // pixels that reached a bound after being moved
  double distortion = 0.0;

  while (true) {
    if (oracle.predict(cur) == p.target) break;
    if (r.iterations_used >= p.iter_cap) {
      r.note = "iteration cap reached";
      break;
    }
    if (distortion >= max_distortion) {
      r.note = "distortion budget exhausted";
      break;
    }
    for (int j = 0; j < k_classes; ++j) {
      std::fill(seed.begin(), seed.end(), 0.0);
      seed[j] = 1.0;
      jac[j] = oracle.logit_combination_grad(cur, seed).grad;
    }
    ++r.iterations_used;
    const auto s = jsma_saliency(jac, p.target, p.polarity);
    std::size_t best = x.size();
    double best_score = 0.0, direction = 0.0;
    bool any = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      any = any || s.increase[i] > 0.0;
      if (retired[i]) continue;
      if (cur[i] < ceiling && s.increase[i] > best_score) {
        best = i;
        best_score = s.increase[i];
        direction = 1.0;
      }
      if (s.decrease.empty()) continue;
      any = any || s.decrease[i] > 0.0;
      if (cur[i] > 0.0 && s.decrease[i] > best_score) {
        best = i;
        best_score = s.decrease[i];
        direction = -1.0;
      }
    }
    if (best == x.size()) {
      r.degenerate = !any;
      r.note = any ? "all salient pixels saturated" : "saliency map is zero";
      break;
    }
    const double next = std::clamp(cur[best] + direction * p.theta, 0.0, ceiling);
    distortion += std::abs(next - cur[best]);
    cur[best] = next;
    if (next <= 0.0 || next >= ceiling) retired[best] = 1;
  }
  r.x_adv = std::move(cur);
  detail::finalize(r, oracle, x, before);
  return r;
}

// ---------------------------------------------------------------------------
// Carlini & Wagner (l2)

struct CwParams {
  std::optional<int> target;  // unset: non-targeted
  double kappa = 0.0;
  int search_steps = 9;
  int iters_per_step = 100;
  double learning_rate = 0.01;
  double c_init = 10.0;
  double c_min = 1e-5;
  double c_max = 1e3;
};

namespace detail {

// Keeps tanh strictly inside (-1, 1) in double precision.
inline constexpr double kTanhArgLimit = 10.0;

inline double to_tanh_space(double v, double ceiling) {
  const double u = std::clamp(2.0 * v / ceiling - 1.0, -1.0 + 1e-9, 1.0 - 1e-9);
  return std::atanh(u);
}

}  // namespace detail

/// Minimizes ||(x' - x) / M||^2 + c * f(x') over w with
/// x' = M/2 * (tanh(atanh(2x/M - 1) + w) + 1), using Adam. c starts at c_init
/// and then bisects [c_min, c_max] geometrically: a success lowers the upper
/// end, a failure raises the lower end. Returns the smallest-l2 success.
inline AttackResult carlini_wagner(GradientOracle& oracle, std::span<const double> x, int label, const CwParams& p) {
  if (p.kappa < 0.0) throw std::invalid_argument("cw: kappa must be >= 0");
  if (p.search_steps < 1 || p.iters_per_step < 1) throw std::invalid_argument("cw: empty budget");
  AttackResult r;
  r.attack = "cw";
  r.true_label = label;
  r.target_label = p.target;
  const auto before = oracle.calls();
  const double ceiling = oracle.ceiling();
  const std::size_t n = x.size();
  const Objective obj = p.target ? Objective::cw_targeted(*p.target, p.kappa) : Objective::cw_untargeted(label, p.kappa);

  std::vector<double> base(n);
  for (std::size_t i = 0; i < n; ++i) base[i] = detail::to_tanh_space(x[i], ceiling);

  std::optional<std::vector<double>> best;
  double best_l2 = std::numeric_limits<double>::infinity();
  std::vector<double> fallback(x.begin(), x.end());
  double fallback_f = std::numeric_limits<double>::infinity();

  const double inv_m2 = 1.0 / (ceiling * ceiling);
  double lo = p.c_min, hi = p.c_max, c = std::clamp(p.c_init, p.c_min, p.c_max);
  std::vector<double> w(n), m1(n), m2(n), xp(n), grad_w(n), tanh_u(n);
  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

  for (int step = 0; step < p.search_steps; ++step) {
    std::fill(w.begin(), w.end(), 0.0);
    std::fill(m1.begin(), m1.end(), 0.0);
    std::fill(m2.begin(), m2.end(), 0.0);
    bool success_here = false;
    double prev_loss = std::numeric_limits<double>::infinity();
    const int check_every = std::max(1, p.iters_per_step / 10);

    for (int it = 0; it < p.iters_per_step; ++it) {
      for (std::size_t i = 0; i < n; ++i) {
        const double u = std::clamp(base[i] + w[i], -detail::kTanhArgLimit, detail::kTanhArgLimit);
        tanh_u[i] = std::tanh(u);
        xp[i] = 0.5 * ceiling * (tanh_u[i] + 1.0);
      }
      const auto lg = oracle.loss_and_input_grad(xp, obj);
      ++r.iterations_used;
      double dist = 0.0;
      for (std::size_t i = 0; i < n; ++i) dist += (xp[i] - x[i]) * (xp[i] - x[i]);
      const double loss = dist * inv_m2 + c * lg.loss;

      const int pred = argmax(lg.logits);
      const bool ok = p.target ? pred == *p.target : pred != label;
      if (ok) {
        success_here = true;
        const double l2 = std::sqrt(dist);  // pixel units
        if (l2 < best_l2) {
          best_l2 = l2;
          best = xp;
        }
      } else if (!best && lg.loss < fallback_f) {
        fallback_f = lg.loss;
        fallback = xp;
      }

      if (it % check_every == 0) {
        if (loss > prev_loss * 0.9999) break;
        prev_loss = loss;
      }

      const double t = it + 1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double u = base[i] + w[i];
        const double dxdw = std::abs(u) >= detail::kTanhArgLimit ? 0.0 : 0.5 * ceiling * (1.0 - tanh_u[i] * tanh_u[i]);
        grad_w[i] = (2.0 * (xp[i] - x[i]) * inv_m2 + c * lg.grad[i]) * dxdw;
        m1[i] = beta1 * m1[i] + (1.0 - beta1) * grad_w[i];
        m2[i] = beta2 * m2[i] + (1.0 - beta2) * grad_w[i] * grad_w[i];
        const double mh = m1[i] / (1.0 - std::pow(beta1, t));
        const double vh = m2[i] / (1.0 - std::pow(beta2, t));
        w[i] -= p.learning_rate * mh / (std::sqrt(vh) + adam_eps);
      }
    }

    if (success_here)
      hi = c;
    else
      lo = c;
    c = std::sqrt(lo * hi);
  }

  if (best) {
    r.x_adv = std::move(*best);
  } else {
    r.x_adv = std::move(fallback);
    r.note = "no constant in range succeeded";
  }
  detail::finalize(r, oracle, x, before);
  return r;
}

// ---------------------------------------------------------------------------
// DeepFool

struct DeepFoolParams {
  int max_iters = 50;
  Norm norm = Norm::L2;
  double overshoot = 0.02;
  std::optional<int> target;  // set: only the boundary toward this label is linearized
};

/// Iterative linearization of the class boundaries. Each iteration costs one
/// callback per competing class (K - 1, or 1 when targeted); the accumulated
/// perturbation is scaled by (1 + overshoot) and clipped to the box.
inline AttackResult deepfool(GradientOracle& oracle, std::span<const double> x, int label, const DeepFoolParams& p) {
  if (p.max_iters < 1) throw std::invalid_argument("deepfool: max_iters must be >= 1");
  AttackResult r;
  r.attack = "deepfool";
  r.true_label = label;
  r.target_label = p.target;
  const auto before = oracle.calls();
  const int k_classes = oracle.num_classes();
  const std::size_t n = x.size();
  std::vector<double> total(n, 0.0), cur(x.begin(), x.end()), seed(k_classes);

  while (r.iterations_used < p.max_iters && !detail::is_success(oracle, cur, label, p.target)) {
    double best_dist = std::numeric_limits<double>::infinity();
    std::vector<double> best_w;
    double best_f = 0.0;
    for (int k = 0; k < k_classes; ++k) {
      if (k == label || (p.target && k != *p.target)) continue;
      std::fill(seed.begin(), seed.end(), 0.0);
      seed[k] = 1.0;
      seed[label] = -1.0;
      auto lg = oracle.logit_combination_grad(cur, seed);  // f_k = G_k - G_label
      double dual = 0.0;
      for (double g : lg.grad) dual += p.norm == Norm::L2 ? g * g : std::abs(g);
      if (dual == 0.0) continue;
      const double dist = std::abs(lg.loss) / (p.norm == Norm::L2 ? std::sqrt(dual) : dual);
      if (dist < best_dist) {
        best_dist = dist;
        best_w = std::move(lg.grad);
        best_f = lg.loss;
      }
    }
    ++r.iterations_used;
    if (best_w.empty()) {
      r.degenerate = true;
      r.note = "degenerate gradient";
      break;
    }
    // Step onto the linearized boundary f_k + w . r = 0.
    double dual = 0.0;
    for (double g : best_w) dual += p.norm == Norm::L2 ? g * g : std::abs(g);
    for (std::size_t i = 0; i < n; ++i) {
      const double step = p.norm == Norm::L2 ? -best_f * best_w[i] / dual : -best_f * detail::sign(best_w[i]) / dual;
      total[i] += step;
    }
    for (std::size_t i = 0; i < n; ++i)
      cur[i] = std::clamp(x[i] + (1.0 + p.overshoot) * total[i], 0.0, oracle.ceiling());
  }
  r.x_adv = std::move(cur);
  detail::finalize(r, oracle, x, before);
  return r;
}

/// Runs targeted DeepFool once per wrong label.
inline std::vector<AttackResult> deepfool_targeted_all(GradientOracle& oracle, std::span<const double> x, int label,
                                                       DeepFoolParams p) {
  std::vector<AttackResult> out;
  for (int t = 0; t < oracle.num_classes(); ++t) {
    if (t == label) continue;
    p.target = t;
    out.push_back(deepfool(oracle, x, label, p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// L-BFGS (box-constrained)

struct LbfgsAttackParams {
  int target = 0;
  double c_init = 1e-2;
  double c_growth = 10.0;  // expanding grid factor
  int grid_steps = 6;      // per direction
  int refine_steps = 6;    // geometric bisection inside the success/failure bracket
  int inner_iters = 50;
  int memory = 10;
};

/// Minimizes c ||delta||_2 + CE(x + delta, target) subject to 0 <= x + delta <= M
/// for an expanding grid of c, then refines the largest successful c.
inline AttackResult lbfgs_attack(GradientOracle& oracle, std::span<const double> x, int label,
                                 const LbfgsAttackParams& p) {
  if (p.target < 0 || p.target >= oracle.num_classes()) throw std::invalid_argument("lbfgs: target out of range");
  if (oracle.predict(x) == p.target) throw std::invalid_argument("lbfgs: target equals the current prediction");
  AttackResult r;
  r.attack = "lbfgs";
  r.true_label = label;
  r.target_label = p.target;
  const auto before = oracle.calls();
  const std::size_t n = x.size();
  const double ceiling = oracle.ceiling();
  std::vector<double> lo(n), hi(n);
  for (std::size_t i = 0; i < n; ++i) {
    lo[i] = -x[i];
    hi[i] = ceiling - x[i];
  }
  std::vector<double> xp(n);
  const Objective ce = Objective::cross_entropy(p.target);

  std::optional<std::vector<double>> best;
  double best_l2 = std::numeric_limits<double>::infinity();
  std::vector<double> fallback(x.begin(), x.end());
  double fallback_loss = std::numeric_limits<double>::infinity();

  // Returns whether the minimizer for this c is adversarial.
  auto solve = [&](double c) {
    ObjectiveFn fn = [&](std::span<const double> delta, std::span<double> g) {
      for (std::size_t i = 0; i < n; ++i) xp[i] = std::clamp(x[i] + delta[i], 0.0, ceiling);
      const auto lg = oracle.loss_and_input_grad(xp, ce);
      double nrm = 0.0;
      for (double d : delta) nrm += d * d;
      nrm = std::sqrt(nrm);
      for (std::size_t i = 0; i < n; ++i) g[i] = lg.grad[i] + (nrm > 0.0 ? c * delta[i] / nrm : 0.0);
      return c * nrm + lg.loss;
    };
    LbfgsOptions opt;
    opt.memory = p.memory;
    opt.max_iterations = p.inner_iters;
    const auto res = minimize_box_lbfgs(fn, std::vector<double>(n, 0.0), lo, hi, opt);
    r.iterations_used += res.iterations;
    std::vector<double> cand(n);
    double l2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cand[i] = std::clamp(x[i] + res.x[i], 0.0, ceiling);
      l2 += (cand[i] - x[i]) * (cand[i] - x[i]);
    }
    l2 = std::sqrt(l2);
    const bool ok = oracle.predict(cand) == p.target;
    if (ok && l2 < best_l2) {
      best_l2 = l2;
      best = cand;
    } else if (!ok && !best) {
      const double loss = cross_entropy(oracle.logits(cand), p.target);
      if (loss < fallback_loss) {
        fallback_loss = loss;
        fallback = cand;
      }
    }
    return ok;
  };

  // Expanding grid: walk c down (weaker distance penalty) until a success,
  // or up from a success until failure, to bracket the threshold.
  double c = p.c_init;
  std::optional<double> c_ok, c_fail;
  if (solve(c)) {
    c_ok = c;
    for (int i = 0; i < p.grid_steps; ++i) {
      c *= p.c_growth;
      if (solve(c)) {
        c_ok = c;
      } else {
        c_fail = c;
        break;
      }
    }
  } else {
    c_fail = c;
    for (int i = 0; i < p.grid_steps; ++i) {
      c /= p.c_growth;
      if (solve(c)) {
        c_ok = c;
        break;
      }
      c_fail = c;
    }
  }
  if (c_ok && c_fail) {
    double a = *c_ok, b = *c_fail;
    for (int i = 0; i < p.refine_steps; ++i) {
      const double mid = std::sqrt(a * b);
      if (solve(mid))
        a = mid;
      else
        b = mid;
    }
  }

  if (best) {
    r.x_adv = std::move(*best);
  } else {
    r.x_adv = std::move(fallback);
    r.note = "no constant on the grid succeeded";
  }
  detail::finalize(r, oracle, x, before);
  return r;
}

// ---------------------------------------------------------------------------
// Batches

enum class AttackKind { Fgsm, BimA, BimB, Jsma, CarliniWagner, DeepFool, Lbfgs };

inline std::string attack_name(AttackKind k) {
  switch (k) {
    case AttackKind::Fgsm: return "fgsm";
    case AttackKind::BimA: return "bim_a";
    case AttackKind::BimB: return "bim_b";
    case AttackKind::Jsma: return "jsma";
    case AttackKind::CarliniWagner: return "cw";
    case AttackKind::DeepFool: return "deepfool";
    case AttackKind::Lbfgs: return "lbfgs";
  }
  return "unknown";
}

inline AttackKind parse_attack_kind(const std::string& name) {
  for (auto k : {AttackKind::Fgsm, AttackKind::BimA, AttackKind::BimB, AttackKind::Jsma, AttackKind::CarliniWagner,
                 AttackKind::DeepFool, AttackKind::Lbfgs})
    if (attack_name(k) == name) return k;
  throw ConfigError("unknown attack '" + name + "'");
}

enum class DeepFoolMode { NonTargeted, TargetedAveraged };

/// One attack with fully resolved hyperparameters. Target labels of targeted
/// runs are drawn per item by run_attack_batch; the `target` fields of the
/// parameter structs are overwritten.
struct AttackSpec {
  AttackKind kind = AttackKind::Fgsm;
  bool targeted = false;  // fgsm and cw; jsma and lbfgs are always targeted
  DeepFoolMode deepfool_mode = DeepFoolMode::NonTargeted;
  FgsmParams fgsm;
  BimParams bim;
  JsmaParams jsma;
  CwParams cw;
  DeepFoolParams deepfool;
  LbfgsAttackParams lbfgs;

  bool needs_target() const {
    return kind == AttackKind::Jsma || kind == AttackKind::Lbfgs ||
           ((kind == AttackKind::Fgsm || kind == AttackKind::CarliniWagner) && targeted);
  }
};

struct BatchItem {
  std::span<const double> x;
  int label = 0;
};

struct BatchOutcome {
  std::vector<AttackResult> results;  // item order; several per item for targeted-averaged DeepFool
  std::vector<int> targets;           // drawn target per item, -1 when untargeted
  std::uint64_t total_calls = 0;      // sum of per-worker oracle counters
  std::size_t successes = 0;
  double mean_calls() const { return results.empty() ? 0.0 : static_cast<double>(total_calls) / results.size(); }
};

/// Uniform draw among the K - 1 wrong labels.
inline int draw_wrong_label(Rng& rng, int label, int classes) {
  int t = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes - 1)));
  return t >= label ? t + 1 : t;
}

inline std::vector<AttackResult> run_attack(GradientOracle& oracle, const BatchItem& item, const AttackSpec& spec,
                                            int target) {
  switch (spec.kind) {
    case AttackKind::Fgsm: {
      auto p = spec.fgsm;
      p.target = spec.targeted ? std::optional<int>(target) : std::nullopt;
      return {fgsm(oracle, item.x, item.label, p)};
    }
    case AttackKind::BimA:
    case AttackKind::BimB: {
      auto p = spec.bim;
      p.variant = spec.kind == AttackKind::BimA ? BimVariant::A : BimVariant::B;
      return {bim(oracle, item.x, item.label, p)};
    }
    case AttackKind::Jsma: {
      auto p = spec.jsma;
      p.target = target;
      return {jsma(oracle, item.x, item.label, p)};
    }
    case AttackKind::CarliniWagner: {
      auto p = spec.cw;
      p.target = spec.targeted ? std::optional<int>(target) : std::nullopt;
      return {carlini_wagner(oracle, item.x, item.label, p)};
    }
    case AttackKind::DeepFool:
      if (spec.deepfool_mode == DeepFoolMode::TargetedAveraged)
        return deepfool_targeted_all(oracle, item.x, item.label, spec.deepfool);
      return {deepfool(oracle, item.x, item.label, spec.deepfool)};
    case AttackKind::Lbfgs: {
      auto p = spec.lbfgs;
      p.target = target;
      return {lbfgs_attack(oracle, item.x, item.label, p)};
    }
  }
  throw std::logic_error("unhandled attack kind");
}

/// Attacks every item. Targets are drawn up front from `seed`, so results do
/// not depend on `workers`. Each worker owns an oracle over the shared frozen
/// model; their counters are summed. A failing item yields an unsuccessful
/// result carrying the error text instead of aborting the batch.
inline BatchOutcome run_attack_batch(const Classifier& model, std::span<const BatchItem> items, const AttackSpec& spec,
                                     std::uint64_t seed, int workers = 1, double ceiling = 255.0) {
  if (items.empty()) throw DataError("run_attack_batch: empty batch");
  BatchOutcome out;
  Rng rng(seed);
  for (const auto& it : items)
    out.targets.push_back(spec.needs_target() ? draw_wrong_label(rng, it.label, model.num_classes()) : -1);

  std::vector<std::vector<AttackResult>> per_item(items.size());
  workers = std::clamp(workers, 1, static_cast<int>(items.size()));
  std::vector<std::uint64_t> worker_calls(workers, 0);
  auto work = [&](int w) {
    GradientOracle oracle(model, ceiling);
    for (std::size_t i = w; i < items.size(); i += workers) {
      const auto before = oracle.calls();
      try {
        per_item[i] = run_attack(oracle, items[i], spec, out.targets[i]);
      } catch (const std::exception& e) {
        AttackResult r;
        r.attack = attack_name(spec.kind);
        r.true_label = items[i].label;
        if (out.targets[i] >= 0) r.target_label = out.targets[i];
        r.x_adv.assign(items[i].x.begin(), items[i].x.end());
        r.predicted_label = oracle.predict(r.x_adv);
        r.gradient_calls = oracle.calls() - before;
        r.note = std::string("error: ") + e.what();
        per_item[i] = {std::move(r)};
      }
      for (auto& r : per_item[i]) r.item = i;
    }
    worker_calls[w] = oracle.calls();
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (auto& v : per_item)
    for (auto& r : v) {
      out.successes += r.success;
      out.results.push_back(std::move(r));
    }
  for (auto c : worker_calls) out.total_calls += c;
  return out;
}

}  // namespace advspec
