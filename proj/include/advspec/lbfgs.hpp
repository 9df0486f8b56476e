#pragma once

// Projected L-BFGS for box-constrained smooth(ish) minimization.
//
// Search directions come from the standard two-loop recursion; coordinates
// sitting on a bound whose gradient points outward are frozen for the step.
// Steps are accepted by a projected Armijo backtracking rule, so the
// objective never increases across accepted iterations.

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <span>
#include <vector>

namespace advspec {

struct LbfgsOptions {
  int memory = 10;
  int max_iterations = 100;
  int max_backtracks = 20;
  double armijo = 1e-4;
  double gradient_tolerance = 1e-8;  // on the projected gradient's infinity norm
  double relative_decrease = 1e-10;
};

struct LbfgsOutcome {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;    // accepted steps
  int evaluations = 0;   // objective + gradient evaluations
  std::vector<double> accepted_values;  // value after each accepted step, starting with f(x0)
};

/// fn(x, grad) returns f(x) and fills grad.
using ObjectiveFn = std::function<double(std::span<const double>, std::span<double>)>;

inline LbfgsOutcome minimize_box_lbfgs(const ObjectiveFn& fn, std::vector<double> x, std::span<const double> lo,
                                       std::span<const double> hi, const LbfgsOptions& opt = {}) {
  const std::size_t n = x.size();
  auto project = [&](std::vector<double>& v) {
    for (std::size_t i = 0; i < n; ++i) v[i] = std::clamp(v[i], lo[i], hi[i]);
  };
  project(x);

  LbfgsOutcome out;
  std::vector<double> g(n);
  double f = fn(x, g);
  ++out.evaluations;
  out.accepted_values.push_back(f);

  std::deque<std::pair<std::vector<double>, std::vector<double>>> pairs;  // (s, y)
  std::vector<double> d(n), x_new(n), g_new(n), alpha;

  auto frozen = [&](std::size_t i) { return (x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0); };

  for (int it = 0; it < opt.max_iterations; ++it) {
    double pg = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (!frozen(i)) pg = std::max(pg, std::abs(g[i]));
    if (pg <= opt.gradient_tolerance) break;

    // Two-loop recursion.
    for (std::size_t i = 0; i < n; ++i) d[i] = frozen(i) ? 0.0 : -g[i];
    alpha.assign(pairs.size(), 0.0);
    for (std::size_t k = pairs.size(); k-- > 0;) {
      const auto& [s, y] = pairs[k];
      double sy = 0.0, sd = 0.0;
      for (std::size_t i = 0; i < n; ++i) sy += s[i] * y[i], sd += s[i] * d[i];
      alpha[k] = sd / sy;
      for (std::size_t i = 0; i < n; ++i) d[i] -= alpha[k] * y[i];
    }
    if (!pairs.empty()) {
      const auto& [s, y] = pairs.back();
      double sy = 0.0, yy = 0.0;
      for (std::size_t i = 0; i < n; ++i) sy += s[i] * y[i], yy += y[i] * y[i];
      const double gamma = sy / yy;
      for (double& v : d) v *= gamma;
    }
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto& [s, y] = pairs[k];
      double yd = 0.0, sy = 0.0;
      for (std::size_t i = 0; i < n; ++i) yd += y[i] * d[i], sy += s[i] * y[i];
      const double beta = yd / sy;
      for (std::size_t i = 0; i < n; ++i) d[i] += s[i] * (alpha[k] - beta);
    }
    for (std::size_t i = 0; i < n; ++i)
      if (frozen(i)) d[i] = 0.0;

    double slope = 0.0;
    for (std::size_t i = 0; i < n; ++i) slope += d[i] * g[i];
    if (!(slope < 0.0)) {
      // Not a descent direction: fall back to projected steepest descent.
      pairs.clear();
      for (std::size_t i = 0; i < n; ++i) d[i] = frozen(i) ? 0.0 : -g[i];
    }
    double step = 1.0;
    if (pairs.empty()) {
      double dn = 0.0;
      for (double v : d) dn += v * v;
      step = dn > 0.0 ? 1.0 / std::sqrt(dn) : 1.0;
    }

    bool accepted = false;
    double f_new = f;
    for (int bt = 0; bt < opt.max_backtracks; ++bt) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + step * d[i];
      project(x_new);
      double decrease = 0.0;
      for (std::size_t i = 0; i < n; ++i) decrease += g[i] * (x_new[i] - x[i]);
      f_new = fn(x_new, g_new);
      ++out.evaluations;
      if (f_new <= f + opt.armijo * decrease && f_new <= f) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    std::vector<double> s(n), y(n);
    double sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - x[i];
      y[i] = g_new[i] - g[i];
      sy += s[i] * y[i];
    }
    if (sy > 1e-12) {
      pairs.emplace_back(std::move(s), std::move(y));
      if (static_cast<int>(pairs.size()) > opt.memory) pairs.pop_front();
    }
    const double prev = f;
    x.swap(x_new);
    g.swap(g_new);
    f = f_new;
    ++out.iterations;
    out.accepted_values.push_back(f);
    if (prev - f <= opt.relative_decrease * std::max(1.0, std::abs(prev))) break;
  }
  out.x = std::move(x);
  out.value = f;
  return out;
}

}  // namespace advspec
