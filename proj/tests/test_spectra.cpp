#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>

#include "advspec/fft.hpp"
#include "advspec/spectra.hpp"
#include "advspec/spectra_io.hpp"

using namespace advspec;

namespace {

AudioClip sine(double freq, int rate, double seconds, double amp = 0.5) {
  AudioClip c;
  c.sample_rate = rate;
  c.samples.resize(static_cast<std::size_t>(seconds * rate));
  for (std::size_t i = 0; i < c.samples.size(); ++i)
    c.samples[i] = amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate);
  return c;
}

std::size_t argmax_row(const Spectrogram& s, std::size_t t) {
  std::size_t best = 0;
  for (std::size_t r = 1; r < s.rows(); ++r)
    if (s.values(r, t) > s.values(best, t)) best = r;
  return best;
}

}  // namespace

TEST(Fft, MatchesNaiveDft) {
  for (std::size_t n : {1u, 2u, 8u, 12u, 64u, 100u}) {
    Rng rng(n);
    std::vector<fft::cplx> a(n);
    for (auto& v : a) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    auto b = a;
    fft::forward(b);
    for (std::size_t k = 0; k < n; ++k) {
      fft::cplx acc = 0;
      for (std::size_t i = 0; i < n; ++i)
        acc += a[i] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * i) / n);
      EXPECT_NEAR(std::abs(acc - b[k]), 0.0, 1e-9) << "n=" << n << " k=" << k;
    }
    fft::inverse(b);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(std::abs(a[i] - b[i]), 0.0, 1e-12);
  }
}

TEST(Stft, ZeroSignalGivesZeroSpectrogram) {
  AudioClip z{std::vector<double>(4000, 0.0), 8000};
  const auto s = stft_spectrogram(z, {512, 0, 128, Window::Hann});
  for (double v : s.values.data) EXPECT_EQ(v, 0.0);
}

TEST(Stft, ToneArgmaxMatchesBinArithmetic) {
  const auto clip = sine(1000.0, 8000, 1.0);
  const auto s = stft_spectrogram(clip, {512, 0, 128, Window::Hann});
  EXPECT_EQ(s.rows(), 257u);
  // Edge frames mix in reflected samples; interior frames see only the tone.
  const std::size_t edge = 512 / 2 / 128;
  for (std::size_t t = 0; t < s.cols(); ++t) {
    if (t >= edge && t + edge < s.cols())
      EXPECT_EQ(argmax_row(s, t), 64u) << "frame " << t;
    else
      EXPECT_LE(std::abs(static_cast<int>(argmax_row(s, t)) - 64), 1) << "frame " << t;
  }
}

TEST(Stft, ToneArgmaxAcrossFftSizes) {
  const auto clip = sine(1234.0, 22050, 1.0);
  for (int n : {512, 1024, 2048}) {
    const auto s = stft_spectrogram(clip, {n, 0, 512, Window::Hann});
    const double expected = 1234.0 * n / 22050.0;
    const std::size_t edge = static_cast<std::size_t>(n) / 2 / 512 + 1;
    for (std::size_t t = edge; t + edge < s.cols(); ++t)
      EXPECT_LE(std::abs(static_cast<double>(argmax_row(s, t)) - expected), 1.0) << "n_fft=" << n;
  }
}

TEST(Stft, ParsevalRectangularFrame) {
  Rng rng(3);
  AudioClip c;
  c.sample_rate = 8000;
  c.samples.resize(256);
  for (double& v : c.samples) v = rng.uniform(-0.9, 0.9);
  // One hop-aligned frame in the middle of the clip sees only real samples.
  const StftConfig cfg{64, 0, 64, Window::Rectangular};
  const auto s = stft_spectrogram(c, cfg);
  const std::size_t t = 2;  // frame centered at sample 128
  double one_sided = 0.0;
  for (std::size_t k = 0; k < s.rows(); ++k) one_sided += s.values(k, t) * ((k == 0 || k == 32) ? 1.0 : 2.0);
  double energy = 0.0;
  for (std::size_t i = 96; i < 160; ++i) energy += c.samples[i] * c.samples[i];
  EXPECT_NEAR(one_sided / (64.0 * energy), 1.0, 1e-6);
}

TEST(Stft, RejectsShortClipAndBadConfig) {
  AudioClip c{std::vector<double>(100, 0.1), 8000};
  EXPECT_THROW(stft_spectrogram(c, {512, 0, 128, Window::Hann}), ShapeError);
  EXPECT_THROW((StftConfig{512, 600, 128, Window::Hann}.validate()), ConfigError);
  EXPECT_THROW((StftConfig{512, 256, 300, Window::Hann}.validate()), ConfigError);
}

TEST(Mel, HtkFormula) {
  EXPECT_NEAR(hz_to_mel(1000.0), 999.9855371396244, 1e-9);
  EXPECT_NEAR(mel_to_hz(hz_to_mel(4321.0)), 4321.0, 1e-9);
}

TEST(Mel, FilterbankShapeAndCenters) {
  const auto fb = mel_filterbank(40, 1024, 22050);
  EXPECT_EQ(fb.rows, 40u);
  EXPECT_EQ(fb.cols, 513u);
  const auto centers = mel_centers(40, 22050);
  // Independent Mel-formula centers (Hz) and their nearest FFT bins.
  const double want_hz[] = {49.81143579, 691.99680325, 2068.07871467, 10246.08538655};
  const int want_bin[] = {2, 32, 96, 476};
  const int rows[] = {0, 9, 19, 39};
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(centers[rows[i]], want_hz[i], 1e-6);
    std::size_t peak = 0;
    for (std::size_t k = 0; k < fb.cols; ++k)
      if (fb(rows[i], k) > fb(rows[i], peak)) peak = k;
    EXPECT_LE(std::abs(static_cast<int>(peak) - want_bin[i]), 1);
  }
}

TEST(Mel, RowsAreTrianglesWithUnitPeak) {
  const auto fb = mel_filterbank(26, 512, 8000);
  for (std::size_t m = 0; m < fb.rows; ++m) {
    std::size_t first = fb.cols, last = 0, peak = 0;
    for (std::size_t k = 0; k < fb.cols; ++k) {
      EXPECT_GE(fb(m, k), 0.0);
      if (fb(m, k) > 0.0) first = std::min(first, k), last = k;
      if (fb(m, k) > fb(m, peak)) peak = k;
    }
    ASSERT_LT(first, fb.cols);
    EXPECT_DOUBLE_EQ(fb(m, peak), 1.0);
    for (std::size_t k = first; k < peak; ++k) EXPECT_LE(fb(m, k), fb(m, k + 1));
    for (std::size_t k = peak; k < last; ++k) EXPECT_GE(fb(m, k), fb(m, k + 1));
  }
  const auto c = mel_centers(26, 8000);
  for (std::size_t i = 1; i < c.size(); ++i) EXPECT_GT(c[i], c[i - 1]);
}

TEST(Mel, ToneLandsInNearestFilter) {
  const auto clip = sine(700.0, 8000, 1.0);
  const auto s = mel_spectrogram(clip, {512, 0, 128, Window::Hann}, 40);
  const auto c = mel_centers(40, 8000);
  std::size_t nearest = 0;
  for (std::size_t m = 1; m < c.size(); ++m)
    if (std::abs(c[m] - 700.0) < std::abs(c[nearest] - 700.0)) nearest = m;
  EXPECT_EQ(argmax_row(s, s.cols() / 2), nearest);
}

TEST(Mel, ZeroSignal) {
  AudioClip z{std::vector<double>(2000, 0.0), 8000};
  for (double v : mel_spectrogram(z, {256, 0, 64, Window::Hann}, 20).values.data) EXPECT_EQ(v, 0.0);
}

TEST(Mfcc, DctAgainstReference) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const auto plain = dct2(x, false);
  const auto ortho = dct2(x, true);
  const double want_plain[] = {30.0, -9.95959314, 0.0, -0.898055953, 0.0};
  const double want_ortho[] = {6.70820393, -3.14949989, 0.0, -0.283990228, 0.0};
  for (int k = 0; k < 5; ++k) {
    EXPECT_NEAR(plain[k], want_plain[k], 1e-8);
    EXPECT_NEAR(ortho[k], want_ortho[k], 1e-8);
  }
}

TEST(Mfcc, OrthonormalToggleScalesPerCoefficient) {
  const auto clip = sine(440.0, 22050, 1.0);
  MfccConfig a;
  a.n_mfcc = 20;
  MfccConfig b = a;
  b.dct_orthonormal = false;
  const auto x = mfcc(clip, a), y = mfcc(clip, b);
  const double n = a.n_mels;
  for (std::size_t k = 0; k < x.rows(); ++k) {
    const double scale = std::sqrt((k == 0 ? 0.25 : 0.5) / n);
    for (std::size_t t = 0; t < x.cols(); ++t) EXPECT_NEAR(x.values(k, t), y.values(k, t) * scale, 1e-9);
  }
}

TEST(Mfcc, StationarySignalHasIdenticalInteriorFrames) {
  AudioClip c{std::vector<double>(22050 * 2, 0.0), 22050};
  // Period divides the hop, so every interior frame sees the same samples.
  for (std::size_t i = 0; i < c.samples.size(); ++i)
    c.samples[i] = 0.4 * std::sin(2.0 * std::numbers::pi * static_cast<double>(i % 64) / 64.0);
  MfccConfig cfg;
  cfg.n_mfcc = 13;
  const auto m = mfcc(c, cfg);
  for (std::size_t t = 2; t + 2 < m.cols(); ++t)
    for (std::size_t k = 0; k < m.rows(); ++k) EXPECT_NEAR(m.values(k, t), m.values(k, 1), 1e-6);
}

TEST(Mfcc, GridAccepted) {
  const auto clip = sine(440.0, 22050, 1.0);
  for (int n : {13, 20, 40}) {
    MfccConfig cfg;
    cfg.n_mfcc = n;
    cfg.hop = 1024;
    EXPECT_EQ(mfcc(clip, cfg).rows(), static_cast<std::size_t>(n));
  }
}

TEST(Lifter, ZeroIsIdentityAndFactorsMatch) {
  Matrix m(40, 3);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = 0.5 + static_cast<double>(i);
  EXPECT_EQ(lifter(m, 0.0).data, m.data);
  const auto two = lifter(m, 2.0);
  EXPECT_DOUBLE_EQ(two(0, 0), 2.0 * m(0, 0));
  for (int n_mfcc : {13, 20, 40})
    for (double d = 0.5; d <= 2.5 + 1e-12; d += 0.5) {
      const double cf = n_mfcc * d;
      const auto l = lifter(m, cf);
      for (std::size_t n = 0; n < m.rows; ++n) {
        const double f = (1.0 + std::sin(std::numbers::pi * (n + 1.0) / cf)) * cf / 2.0;
        EXPECT_DOUBLE_EQ(l(n, 1), m(n, 1) * f);
      }
    }
}

TEST(Wavelet, MotherDefinitions) {
  EXPECT_EQ(mother_sample(Mother::Haar, 0.25, 1.0), std::complex<double>(1.0));
  EXPECT_EQ(mother_sample(Mother::Haar, 0.75, 1.0), std::complex<double>(-1.0));
  EXPECT_EQ(mother_sample(Mother::Haar, 1.5, 1.0), std::complex<double>(0.0));
  const double hat0 = mother_sample(Mother::MexicanHat, 0.0, 1.0).real();
  EXPECT_NEAR(mother_sample(Mother::MexicanHat, 1.0, 1.0).real(), 0.0, 1e-15);
  EXPECT_NEAR(mother_sample(Mother::MexicanHat, -1.0, 1.0).real(), 0.0, 1e-15);
  for (double u = -3; u <= 3; u += 0.1) EXPECT_LE(mother_sample(Mother::MexicanHat, u, 1.0).real(), hat0);
  EXPECT_NEAR(std::abs(mother_sample(Mother::ComplexMorlet, 0.0, 1.0)), 0.3989422804014327, 1e-12);
  EXPECT_THROW(mother_sample(Mother::Haar, 0.1, 0.0), std::invalid_argument);
}

TEST(Wavelet, ZeroSignalGivesZeroScalogram) {
  AudioClip z{std::vector<double>(8000, 0.0), 8000};
  for (Mother m : {Mother::Haar, Mother::MexicanHat, Mother::ComplexMorlet}) {
    DwtConfig cfg;
    cfg.mother = m;
    for (double v : dwt_scalogram(z, cfg).values.data) EXPECT_EQ(v, 0.0);
  }
}

TEST(Wavelet, HaarLocalizesStep) {
  AudioClip c{std::vector<double>(8000, 0.0), 8000};
  for (std::size_t i = 5000; i < c.samples.size(); ++i) c.samples[i] = 0.8;
  DwtConfig cfg;
  cfg.mother = Mother::Haar;
  const auto s = dwt_scalogram(c, cfg);
  const std::size_t hop = cfg.hop_samples(), frame = cfg.frame_samples();
  std::vector<double> energy(s.cols(), 0.0);
  for (std::size_t t = 0; t < s.cols(); ++t)
    for (std::size_t r = 0; r < s.rows(); ++r) energy[t] += s.values(r, t);
  const auto best = static_cast<std::size_t>(std::max_element(energy.begin(), energy.end()) - energy.begin());
  EXPECT_LE(best * hop, 5000u);
  EXPECT_GT(best * hop + frame, 5000u);
  EXPECT_LT(energy[0], 1e-9 * energy[best]);
}

TEST(Wavelet, FrameGeometry) {
  DwtConfig cfg;
  EXPECT_EQ(cfg.frame_samples(), 400u);
  EXPECT_EQ(cfg.hop_samples(), 200u);
  AudioClip c{std::vector<double>(8000, 0.1), 8000};
  const auto s = dwt_scalogram(c, cfg);
  EXPECT_EQ(s.rows(), 64u);
  EXPECT_EQ(s.cols(), 1u + (8000u - 400u) / 200u);
  AudioClip shortc{std::vector<double>(100, 0.1), 8000};
  EXPECT_THROW(dwt_scalogram(shortc, cfg), ShapeError);
}

TEST(Render, BilinearMidpointAndRange) {
  Spectrogram s;
  s.values = Matrix(2, 2);
  s.values(0, 1) = 255.0;
  s.values(1, 0) = 255.0;
  const auto x = render(s, {3, 3, 255.0, false});
  EXPECT_DOUBLE_EQ(x.pixels[4], 127.5);
  EXPECT_DOUBLE_EQ(x.pixels[1], 127.5);
  EXPECT_DOUBLE_EQ(x.pixels[0], 0.0);
  EXPECT_DOUBLE_EQ(x.pixels[2], 255.0);
}

TEST(Render, IdentityResizeOnlyNormalizes) {
  Spectrogram s;
  s.values = Matrix(128, 128);
  Rng rng(5);
  for (double& v : s.values.data) v = rng.uniform(0, 255);
  s.values.data[0] = 0.0;
  s.values.data[1] = 255.0;
  const auto x = render(s, {128, 128, 255.0, false});
  for (std::size_t i = 0; i < x.pixels.size(); ++i) EXPECT_NEAR(x.pixels[i], s.values.data[i], 1e-9);
}

TEST(Render, RandomSpectrogramFillsBox) {
  Spectrogram s;
  s.values = Matrix(64, 200);
  Rng rng(9);
  for (double& v : s.values.data) v = rng.uniform(0, 3);
  const auto x = render(s);
  EXPECT_EQ(x.pixels.size(), 128u * 128u);
  EXPECT_DOUBLE_EQ(*std::min_element(x.pixels.begin(), x.pixels.end()), 0.0);
  EXPECT_DOUBLE_EQ(*std::max_element(x.pixels.begin(), x.pixels.end()), 255.0);
  Spectrogram flat;
  flat.values = Matrix(4, 4);
  for (double& v : flat.values.data) v = 3.0;
  for (double v : render(flat).pixels) EXPECT_EQ(v, 0.0);
}

TEST(Container, RoundTripAndRejectsCorruption) {
  ModelInput x;
  x.height = 3;
  x.width = 2;
  x.pixels = {0, 1.5, 2, 3, 254.25, 255};
  const auto bytes = encode_input(x);
  EXPECT_EQ(bytes.size(), 24u + 4u * 6u);
  const auto y = decode_input(bytes);
  EXPECT_EQ(y.height, 3);
  EXPECT_EQ(y.width, 2);
  EXPECT_EQ(y.pixels, x.pixels);
  EXPECT_THROW(decode_input(bytes.substr(0, bytes.size() - 1)), FormatError);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_input(bad), FormatError);
}

TEST(Container, PngSignatureAndSize) {
  std::vector<double> v{0, 128, 255, 64};
  const auto png = encode_png(2, 2, v, 255.0);
  EXPECT_EQ(png.substr(1, 3), "PNG");
  EXPECT_EQ(png.substr(png.size() - 8, 4), "IEND");
}
