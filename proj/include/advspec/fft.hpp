#pragma once

// In-place complex FFT. Power-of-two lengths use iterative radix-2,
// anything else goes through Bluestein's chirp-z reduction.

#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace advspec::fft {

using cplx = std::complex<double>;

constexpr bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

constexpr std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

namespace detail {

inline void radix2(std::span<cplx> a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const std::size_t half = len / 2;
    std::vector<cplx> tw(half);
    for (std::size_t k = 0; k < half; ++k) tw[k] = std::polar(1.0, ang * static_cast<double>(k));
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const cplx u = a[i + k];
        const cplx v = a[i + k + half] * tw[k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

inline void bluestein(std::span<cplx> a, bool inverse) {
  const std::size_t n = a.size();
  const std::size_t m = next_pow2(2 * n - 1);
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<cplx> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k*k mod 2n keeps the angle argument small for long transforms
    const auto kk = static_cast<double>((k * k) % (2 * n));
    chirp[k] = std::polar(1.0, sign * std::numbers::pi * kk / static_cast<double>(n));
  }
  std::vector<cplx> u(m), v(m);
  for (std::size_t k = 0; k < n; ++k) u[k] = a[k] * chirp[k];
  v[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) v[k] = v[m - k] = std::conj(chirp[k]);
  radix2(u, false);
  radix2(v, false);
  for (std::size_t k = 0; k < m; ++k) u[k] *= v[k];
  radix2(u, true);
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = u[k] * scale * chirp[k];
}

}  // namespace detail

/// Unnormalized forward transform: X[k] = sum_n x[n] exp(-2 pi i k n / N).
inline void forward(std::span<cplx> a) {
  if (a.size() <= 1) return;
  if (is_pow2(a.size()))
    detail::radix2(a, false);
  else
    detail::bluestein(a, false);
}

/// Inverse transform including the 1/N factor.
inline void inverse(std::span<cplx> a) {
  if (a.empty()) return;
  if (a.size() > 1) {
    if (is_pow2(a.size()))
      detail::radix2(a, true);
    else
      detail::bluestein(a, true);
  }
  const double scale = 1.0 / static_cast<double>(a.size());
  for (auto& v : a) v *= scale;
}

/// One-sided spectrum of a real frame (N/2 + 1 bins).
inline std::vector<cplx> rfft(std::span<const double> x) {
  std::vector<cplx> buf(x.begin(), x.end());
  forward(buf);
  buf.resize(x.size() / 2 + 1);
  return buf;
}

}  // namespace advspec::fft
