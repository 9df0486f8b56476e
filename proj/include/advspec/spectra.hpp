#pragma once

// Time-frequency representations and their rendering into model inputs.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "advspec/audio.hpp"
#include "advspec/common.hpp"
#include "advspec/fft.hpp"

namespace advspec {

/// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  bool empty() const { return data.empty(); }
};

/// Compression applied to log-scaled spectrograms: log(1 + v / kLogFloor).
inline constexpr double kLogFloor = 1e-10;

inline double log_compress(double v) { return std::log1p(v / kLogFloor); }

enum class Scale { Linear, Log };

/// Frequency (or scale) rows by time columns.
struct Spectrogram {
  Matrix values;
  std::vector<double> row_centers;  // Hz (pseudo-frequency for scalograms)
  double frame_period = 0.0;        // seconds between columns
  Scale scale = Scale::Linear;

  std::size_t rows() const { return values.rows; }
  std::size_t cols() const { return values.cols; }
};

/// Rendered single-channel H x W input in [0, ceiling].
struct ModelInput {
  int height = 128;
  int width = 128;
  double ceiling = 255.0;
  std::vector<double> pixels;

  std::size_t size() const { return pixels.size(); }
};

// ---------------------------------------------------------------------------
// STFT

enum class Window { Hann, Rectangular };

struct StftConfig {
  int n_fft = 2048;
  int window_length = 0;  // 0 means n_fft
  int hop = 512;
  Window window = Window::Hann;

  int effective_window() const { return window_length > 0 ? window_length : n_fft; }

  void validate() const {
    if (n_fft <= 0) throw ConfigError("stft: n_fft must be positive");
    const int wl = effective_window();
    if (wl <= 0 || wl > n_fft) throw ConfigError("stft: window length must lie in (0, n_fft]");
    if (hop <= 0 || hop > wl) throw ConfigError("stft: hop must lie in (0, window length]");
  }
};

namespace detail {

/// Window of `length` taps centered inside `n_fft` zeros.
inline std::vector<double> padded_window(const StftConfig& cfg) {
  const int wl = cfg.effective_window();
  std::vector<double> w(cfg.n_fft, 0.0);
  const int offset = (cfg.n_fft - wl) / 2;
  for (int i = 0; i < wl; ++i)
    w[offset + i] = cfg.window == Window::Rectangular
                        ? 1.0
                        : 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / static_cast<double>(wl));
  return w;
}

}  // namespace detail

/// Power spectrogram |STFT|^2 with centered, reflect-padded frames.
/// Column count is 1 + n / hop.
inline Spectrogram stft_spectrogram(const AudioClip& clip, const StftConfig& cfg) {
  cfg.validate();
  if (clip.samples.size() < static_cast<std::size_t>(cfg.effective_window()))
    throw ShapeError("stft: clip shorter than the analysis window");
  const std::size_t n_fft = cfg.n_fft;
  const std::size_t bins = n_fft / 2 + 1;
  const std::size_t frames = 1 + clip.samples.size() / cfg.hop;
  const auto window = detail::padded_window(cfg);
  const auto pad = static_cast<std::ptrdiff_t>(n_fft / 2);

  Spectrogram out;
  out.values = Matrix(bins, frames);
  out.frame_period = static_cast<double>(cfg.hop) / clip.sample_rate;
  out.row_centers.resize(bins);
  for (std::size_t k = 0; k < bins; ++k)
    out.row_centers[k] = static_cast<double>(k) * clip.sample_rate / static_cast<double>(n_fft);

  std::vector<fft::cplx> buf(n_fft);
  for (std::size_t t = 0; t < frames; ++t) {
    const auto start = static_cast<std::ptrdiff_t>(t * cfg.hop) - pad;
    for (std::size_t i = 0; i < n_fft; ++i)
      buf[i] = detail::reflect_at(clip.samples, start + static_cast<std::ptrdiff_t>(i)) * window[i];
    fft::forward(buf);
    for (std::size_t k = 0; k < bins; ++k) out.values(k, t) = std::norm(buf[k]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mel

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Center frequencies (Hz) of the n_mels triangular filters spanning [0, sr/2].
inline std::vector<double> mel_centers(int n_mels, int sample_rate) {
  const double top = hz_to_mel(sample_rate / 2.0);
  std::vector<double> c(n_mels);
  for (int m = 0; m < n_mels; ++m) c[m] = mel_to_hz(top * (m + 1) / (n_mels + 1));
  return c;
}

/// HTK-scale triangular filters over the one-sided FFT bins, each row scaled
/// to a peak of exactly 1.
inline Matrix mel_filterbank(int n_mels, int n_fft, int sample_rate) {
  if (n_mels < 1) throw ConfigError("mel: need at least one filter");
  const std::size_t bins = static_cast<std::size_t>(n_fft) / 2 + 1;
  const double top = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i) edges[i] = mel_to_hz(top * i / (n_mels + 1));

  Matrix fb(n_mels, bins);
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    double peak = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      double v = 0.0;
      if (f > lo && f <= mid)
        v = (f - lo) / (mid - lo);
      else if (f > mid && f < hi)
        v = (hi - f) / (hi - mid);
      fb(m, k) = v;
      peak = std::max(peak, v);
    }
    if (peak > 0.0)
      for (double& v : fb.row(m)) v /= peak;
  }
  return fb;
}

inline Spectrogram apply_filterbank(const Spectrogram& power, const Matrix& fb, std::vector<double> centers) {
  if (fb.cols != power.rows()) throw ShapeError("filterbank width does not match spectrum rows");
  Spectrogram out;
  out.values = Matrix(fb.rows, power.cols());
  out.frame_period = power.frame_period;
  out.row_centers = std::move(centers);
  for (std::size_t m = 0; m < fb.rows; ++m)
    for (std::size_t k = 0; k < fb.cols; ++k) {
      const double w = fb(m, k);
      if (w == 0.0) continue;
      for (std::size_t t = 0; t < power.cols(); ++t) out.values(m, t) += w * power.values(k, t);
    }
  return out;
}

inline Spectrogram mel_spectrogram(const AudioClip& clip, const StftConfig& cfg, int n_mels) {
  const auto power = stft_spectrogram(clip, cfg);
  return apply_filterbank(power, mel_filterbank(n_mels, cfg.n_fft, clip.sample_rate),
                          mel_centers(n_mels, clip.sample_rate));
}

// ---------------------------------------------------------------------------
// MFCC

struct MfccConfig {
  int sample_rate = 22050;
  int n_mfcc = 20;
  int n_mels = 128;
  int n_fft = 2048;
  int hop = 1024;
  bool dct_orthonormal = true;
  double cepstral_filter = 0.0;  // CF; 0 disables liftering

  void validate() const {
    if (sample_rate <= 0) throw ConfigError("mfcc: sample rate must be positive");
    if (n_mfcc < 1 || n_mfcc > n_mels) throw ConfigError("mfcc: need 1 <= n_mfcc <= n_mels");
    if (cepstral_filter < 0.0) throw ConfigError("mfcc: cepstral filter must be >= 0");
    StftConfig{n_fft, 0, hop, Window::Hann}.validate();
  }
};

/// DCT-II of one vector. Unnormalized: X_k = 2 sum x_n cos(pi k (2n+1) / 2N).
/// Orthonormal scales X_0 by sqrt(1/4N) and the rest by sqrt(1/2N).
inline std::vector<double> dct2(std::span<const double> x, bool orthonormal) {
  const std::size_t n = x.size();
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      acc += x[i] * std::cos(std::numbers::pi * static_cast<double>(k) * (2.0 * i + 1.0) / (2.0 * n));
    acc *= 2.0;
    if (orthonormal) acc *= std::sqrt((k == 0 ? 0.25 : 0.5) / static_cast<double>(n));
    out[k] = acc;
  }
  return out;
}

/// Sinusoidal liftering: row n scaled by (1 + sin(pi (n + 1) / CF)) * CF / 2.
/// CF = 0 returns the input unchanged.
inline Matrix lifter(Matrix coeffs, double cf) {
  if (cf < 0.0) throw std::invalid_argument("lifter: CF must be >= 0");
  if (cf == 0.0) return coeffs;
  for (std::size_t n = 0; n < coeffs.rows; ++n) {
    const double factor = (1.0 + std::sin(std::numbers::pi * (n + 1.0) / cf)) * cf / 2.0;
    for (double& v : coeffs.row(n)) v *= factor;
  }
  return coeffs;
}

/// Mel power -> log(1 + v / floor) -> DCT-II over frequency -> first n_mfcc rows -> lifter.
inline Spectrogram mfcc(const AudioClip& input, const MfccConfig& cfg) {
  cfg.validate();
  const AudioClip clip = input.sample_rate == cfg.sample_rate ? input : resample(input, cfg.sample_rate);
  const auto mel = mel_spectrogram(clip, StftConfig{cfg.n_fft, 0, cfg.hop, Window::Hann}, cfg.n_mels);
  Matrix coeffs(cfg.n_mfcc, mel.cols());
  std::vector<double> column(mel.rows());
  for (std::size_t t = 0; t < mel.cols(); ++t) {
    for (std::size_t m = 0; m < mel.rows(); ++m) column[m] = log_compress(mel.values(m, t));
    const auto c = dct2(column, cfg.dct_orthonormal);
    for (int k = 0; k < cfg.n_mfcc; ++k) coeffs(k, t) = c[k];
  }
  Spectrogram out;
  out.values = lifter(std::move(coeffs), cfg.cepstral_filter);
  out.frame_period = mel.frame_period;
  out.row_centers.resize(cfg.n_mfcc);
  for (int k = 0; k < cfg.n_mfcc; ++k) out.row_centers[k] = k;  // quefrency index
  return out;
}

// ---------------------------------------------------------------------------
// Wavelet scalogram

enum class Mother { Haar, MexicanHat, ComplexMorlet };

inline constexpr double kMorletOmega0 = 6.0;

/// psi(t / scale) for the chosen mother (no 1/sqrt(scale) factor).
inline std::complex<double> mother_sample(Mother mother, double t, double scale, double omega0 = kMorletOmega0) {
  if (!(scale > 0.0)) throw std::invalid_argument("mother_sample: scale must be positive");
  const double u = t / scale;
  switch (mother) {
    case Mother::Haar:
      if (u >= 0.0 && u < 0.5) return 1.0;
      if (u >= 0.5 && u < 1.0) return -1.0;
      return 0.0;
    case Mother::MexicanHat: {
      const double norm = 2.0 / (std::sqrt(3.0) * std::pow(std::numbers::pi, 0.25));
      return norm * (1.0 - u * u) * std::exp(-0.5 * u * u);
    }
    case Mother::ComplexMorlet:
      return std::polar(std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi), omega0 * u);
  }
  return 0.0;
}

struct DwtConfig {
  Mother mother = Mother::ComplexMorlet;
  int sample_rate = 8000;
  double frame_ms = 50.0;
  double overlap = 0.5;
  int scales = 64;
  double omega0 = kMorletOmega0;

  std::size_t frame_samples() const {
    return static_cast<std::size_t>(std::llround(frame_ms * 1e-3 * sample_rate));
  }
  std::size_t hop_samples() const {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(frame_samples() * (1.0 - overlap))));
  }

  void validate() const {
    if (sample_rate <= 0) throw ConfigError("dwt: sample rate must be positive");
    if (!(frame_ms > 0.0)) throw ConfigError("dwt: frame length must be positive");
    if (!(overlap >= 0.0 && overlap < 1.0)) throw ConfigError("dwt: overlap must lie in [0, 1)");
    if (scales < 2) throw ConfigError("dwt: need at least two scales");
    if (frame_samples() < 2) throw ConfigError("dwt: frame shorter than two samples");
  }

  /// Log-spaced scales in seconds spanning [2 dt, frame / 2].
  std::vector<double> scale_grid() const {
    const double lo = 2.0 / sample_rate;
    const double hi = std::max(lo * 1.0001, frame_ms * 1e-3 / 2.0);
    std::vector<double> s(scales);
    for (int i = 0; i < scales; ++i) s[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (scales - 1));
    return s;
  }
};

namespace detail {

/// Sample offsets [first, last] where psi(m dt / s) may be non-zero.
inline std::pair<std::ptrdiff_t, std::ptrdiff_t> mother_support(Mother m, double scale, double dt) {
  if (m == Mother::Haar) return {0, static_cast<std::ptrdiff_t>(std::ceil(scale / dt))};
  const auto r = static_cast<std::ptrdiff_t>(std::ceil(5.0 * scale / dt));
  return {-r, r};
}

inline double pseudo_frequency(Mother m, double scale, double omega0) {
  switch (m) {
    case Mother::Haar:
      return 1.0 / scale;
    case Mother::MexicanHat:
      return std::sqrt(2.5) / (2.0 * std::numbers::pi * scale);
    case Mother::ComplexMorlet:
      return omega0 / (2.0 * std::numbers::pi * scale);
  }
  return 0.0;
}

}  // namespace detail

/// Framed continuous-wavelet scalogram. Coefficients
///   c(s, tau) = dt / sqrt(s) * sum_n a[n] conj(psi((t_n - tau) / s))
/// are evaluated at every sample (reflect padding at the clip ends) and their
/// squared magnitude is averaged over each frame.
inline Spectrogram dwt_scalogram(const AudioClip& input, const DwtConfig& cfg) {
  cfg.validate();
  const AudioClip clip = input.sample_rate == cfg.sample_rate ? input : resample(input, cfg.sample_rate);
  const std::size_t frame = cfg.frame_samples();
  const std::size_t hop = cfg.hop_samples();
  const std::size_t n = clip.samples.size();
  if (n < frame) throw ShapeError("dwt: clip shorter than one frame");
  const std::size_t frames = 1 + (n - frame) / hop;
  const double dt = 1.0 / cfg.sample_rate;
  const auto scales = cfg.scale_grid();

  std::ptrdiff_t reach = 0;
  for (double s : scales) {
    const auto [a, b] = detail::mother_support(cfg.mother, s, dt);
    reach = std::max({reach, -a, b});
  }
  const std::size_t padded = n + 2 * static_cast<std::size_t>(reach);
  const std::size_t size = fft::next_pow2(padded + 2 * static_cast<std::size_t>(reach) + 1);

  std::vector<fft::cplx> signal(size);
  for (std::size_t i = 0; i < padded; ++i)
    signal[i] = detail::reflect_at(clip.samples, static_cast<std::ptrdiff_t>(i) - reach);
  fft::forward(signal);

  Spectrogram out;
  out.values = Matrix(scales.size(), frames);
  out.frame_period = static_cast<double>(hop) * dt;
  out.row_centers.resize(scales.size());

  std::vector<fft::cplx> kernel(size);
  for (std::size_t si = 0; si < scales.size(); ++si) {
    const double s = scales[si];
    out.row_centers[si] = detail::pseudo_frequency(cfg.mother, s, cfg.omega0);
    // Correlation with psi is convolution with the reversed conjugate: place
    // conj(psi(m)) at index (-m) mod size.
    std::fill(kernel.begin(), kernel.end(), fft::cplx{});
    const auto [lo, hi] = detail::mother_support(cfg.mother, s, dt);
    const double gain = dt / std::sqrt(s);
    for (std::ptrdiff_t m = lo; m <= hi; ++m) {
      const auto idx = static_cast<std::size_t>((-m % static_cast<std::ptrdiff_t>(size) + static_cast<std::ptrdiff_t>(size)) %
                                                static_cast<std::ptrdiff_t>(size));
      kernel[idx] = gain * std::conj(mother_sample(cfg.mother, static_cast<double>(m) * dt, s, cfg.omega0));
    }
    fft::forward(kernel);
    for (std::size_t k = 0; k < size; ++k) kernel[k] *= signal[k];
    fft::inverse(kernel);
    for (std::size_t f = 0; f < frames; ++f) {
      double acc = 0.0;
      for (std::size_t i = 0; i < frame; ++i) acc += std::norm(kernel[f * hop + i + static_cast<std::size_t>(reach)]);
      out.values(si, f) = acc / static_cast<double>(frame);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rendering

struct RenderConfig {
  int height = 128;
  int width = 128;
  double ceiling = 255.0;
  bool log_scale = true;
};

/// Bilinear resize with corner alignment (corner samples map onto corners).
inline Matrix bilinear_resize(const Matrix& in, std::size_t out_h, std::size_t out_w) {
  Matrix out(out_h, out_w);
  auto coord = [](std::size_t i, std::size_t n_out, std::size_t n_in) {
    return n_out <= 1 || n_in <= 1 ? 0.0 : static_cast<double>(i) * (n_in - 1) / static_cast<double>(n_out - 1);
  };
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = coord(y, out_h, in.rows);
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, in.rows - 1);
    const double wy = fy - y0;
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = coord(x, out_w, in.cols);
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, in.cols - 1);
      const double wx = fx - x0;
      const double top = (1.0 - wx) * in(y0, x0) + wx * in(y0, x1);
      const double bottom = (1.0 - wx) * in(y1, x0) + wx * in(y1, x1);
      out(y, x) = (1.0 - wy) * top + wy * bottom;
    }
  }
  return out;
}

/// Optional log compression, bilinear resize, then min-max normalization to
/// [0, ceiling]. A constant spectrogram renders as all zeros. Row 0 (lowest
/// frequency) ends up in the first pixel row.
inline ModelInput render(const Spectrogram& spec, const RenderConfig& cfg = {}) {
  if (spec.values.empty()) throw ShapeError("render: empty spectrogram");
  if (cfg.height < 1 || cfg.width < 1 || !(cfg.ceiling > 0.0)) throw ConfigError("render: invalid output shape");
  Matrix m = spec.values;
  if (cfg.log_scale && spec.scale == Scale::Linear) {
    for (double& v : m.data) {
      if (v < 0.0) throw std::invalid_argument("render: log scale needs non-negative values");
      v = log_compress(v);
    }
  }
  Matrix r = bilinear_resize(m, cfg.height, cfg.width);
  const auto [lo, hi] = std::minmax_element(r.data.begin(), r.data.end());
  const double min = *lo;
  // Interpolating a constant can leave last-ulp ripple; treat it as flat.
  const double range = *hi - *lo > 1e-12 * std::max(std::abs(*hi), std::abs(*lo)) ? *hi - *lo : 0.0;
  ModelInput out;
  out.height = cfg.height;
  out.width = cfg.width;
  out.ceiling = cfg.ceiling;
  out.pixels.resize(r.data.size());
  for (std::size_t i = 0; i < r.data.size(); ++i)
    out.pixels[i] = range > 0.0 ? std::clamp((r.data[i] - min) / range * cfg.ceiling, 0.0, cfg.ceiling) : 0.0;
  return out;
}

}  // namespace advspec
