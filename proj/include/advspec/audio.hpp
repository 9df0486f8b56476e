#pragma once

// Audio ingestion and waveform-level augmentation.
//
// Clips are mono double buffers in [-1, 1]. Augmentations (time stretch,
// pitch shift) are built from a phase vocoder and a windowed-sinc
// resampler; both clamp their output back into [-1, 1].

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "advspec/common.hpp"
#include "advspec/fft.hpp"

namespace advspec {

struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 0;

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }

  void validate() const {
    if (sample_rate <= 0) throw DataError("audio clip: sample rate must be positive");
    if (samples.empty()) throw DataError("audio clip: no samples");
    for (double s : samples)
      if (!std::isfinite(s) || s < -1.0 || s > 1.0)
        throw DataError("audio clip: amplitude outside [-1, 1]");
  }
};

// ---------------------------------------------------------------------------
// WAV

namespace detail {

inline std::uint32_t le32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t le16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

inline void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

inline double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

}  // namespace detail

/// Decodes RIFF/WAVE bytes. Stereo is downmixed by channel mean.
inline AudioClip decode_wav(std::span<const unsigned char> bytes) {
  using detail::le16;
  using detail::le32;
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw FormatError("wav: missing RIFF/WAVE header");

  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16 || body + len > bytes.size()) throw FormatError("wav: truncated fmt chunk");
      const unsigned char* f = bytes.data() + body;
      format = le16(f);
      channels = le16(f + 2);
      rate = le32(f + 4);
      block_align = le16(f + 12);
      bits = le16(f + 14);
      if (format == 0xFFFE) {
        if (len < 26) throw FormatError("wav: truncated extensible fmt chunk");
        format = le16(f + 24);  // first two bytes of the sub-format GUID
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = std::min<std::size_t>(len, bytes.size() - body);
    }
    pos = body + len + (len & 1);
  }
  if (!have_fmt) throw FormatError("wav: no fmt chunk");
  if (data == nullptr) throw FormatError("wav: no data chunk");
  if (rate == 0) throw FormatError("wav: zero sample rate");
  if (channels < 1 || channels > 2) throw UnsupportedError("wav: only mono or stereo is supported");

  const bool pcm = format == 1 && (bits == 8 || bits == 16 || bits == 24 || bits == 32);
  const bool ieee = format == 3 && bits == 32;
  if (!pcm && !ieee)
    throw UnsupportedError("wav: unsupported encoding (format " + std::to_string(format) + ", " +
                           std::to_string(bits) + " bits)");
  const std::size_t width = bits / 8;
  if (block_align != width * channels) throw FormatError("wav: inconsistent block alignment");

  const std::size_t frames = data_len / block_align;
  if (frames == 0) throw FormatError("wav: empty data chunk");

  auto sample_at = [&](const unsigned char* p) -> double {
    if (ieee) {
      float f;
      std::memcpy(&f, p, 4);
      if (!std::isfinite(f)) throw FormatError("wav: non-finite float sample");
      return detail::clamp_unit(f);
    }
    switch (bits) {
      case 8:
        return (static_cast<int>(p[0]) - 128) / 128.0;
      case 16:
        return static_cast<std::int16_t>(le16(p)) / 32768.0;
      case 24: {
        std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
        if (v & 0x800000) v -= 0x1000000;
        return v / 8388608.0;
      }
      default:
        return static_cast<std::int32_t>(le32(p)) / 2147483648.0;
    }
  };

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const unsigned char* frame = data + i * block_align;
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) acc += sample_at(frame + c * width);
    clip.samples[i] = acc / channels;
  }
  return clip;
}

inline AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("wav: cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

enum class WavEncoding { Pcm16, Float32 };

/// Interleaved channel buffers are written as-is; `channels` > 1 expects interleaving.
inline std::string encode_wav(std::span<const double> interleaved, int sample_rate, int channels = 1,
                              WavEncoding enc = WavEncoding::Pcm16) {
  const std::uint16_t bits = enc == WavEncoding::Pcm16 ? 16 : 32;
  const std::uint16_t align = static_cast<std::uint16_t>(channels * bits / 8);
  const auto data_len = static_cast<std::uint32_t>(interleaved.size() * (bits / 8));
  std::string out = "RIFF";
  detail::put32(out, 36 + data_len);
  out += "WAVEfmt ";
  detail::put32(out, 16);
  detail::put16(out, enc == WavEncoding::Pcm16 ? 1 : 3);
  detail::put16(out, static_cast<std::uint16_t>(channels));
  detail::put32(out, static_cast<std::uint32_t>(sample_rate));
  detail::put32(out, static_cast<std::uint32_t>(sample_rate) * align);
  detail::put16(out, align);
  detail::put16(out, bits);
  out += "data";
  detail::put32(out, data_len);
  for (double s : interleaved) {
    if (enc == WavEncoding::Pcm16) {
      const long v = std::lround(detail::clamp_unit(s) * 32767.0);
      detail::put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
    } else {
      const float f = static_cast<float>(s);
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      detail::put32(out, u);
    }
  }
  return out;
}

inline void save_wav(const std::filesystem::path& path, const AudioClip& clip,
                     WavEncoding enc = WavEncoding::Pcm16) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("wav: cannot write " + path.string());
  const std::string bytes = encode_wav(clip.samples, clip.sample_rate, 1, enc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// ---------------------------------------------------------------------------
// Resampling

namespace detail {

/// Hann-windowed sinc interpolation evaluated at `out_len` points spaced
/// `step` source samples apart. `cutoff` is relative to the source Nyquist.
inline std::vector<double> sinc_interpolate(std::span<const double> x, double step, std::size_t out_len,
                                            double cutoff) {
  constexpr double kZeroCrossings = 32.0;
  const double half_width = kZeroCrossings / cutoff;
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  std::vector<double> y(out_len);
  for (std::size_t j = 0; j < out_len; ++j) {
    const double p = static_cast<double>(j) * step;
    const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil(p - half_width)));
    const auto hi = std::min<std::ptrdiff_t>(n - 1, static_cast<std::ptrdiff_t>(std::floor(p + half_width)));
    double acc = 0.0;
    for (std::ptrdiff_t k = lo; k <= hi; ++k) {
      const double u = p - static_cast<double>(k);
      const double arg = std::numbers::pi * cutoff * u;
      const double sinc = std::abs(arg) < 1e-12 ? 1.0 : std::sin(arg) / arg;
      const double win = 0.5 + 0.5 * std::cos(std::numbers::pi * u / half_width);
      acc += x[static_cast<std::size_t>(k)] * cutoff * sinc * win;
    }
    y[j] = acc;
  }
  return y;
}

inline std::vector<double> resample_to_length(std::span<const double> x, double src_rate, double dst_rate,
                                              std::size_t out_len) {
  const double cutoff = std::min(1.0, dst_rate / src_rate);
  auto y = sinc_interpolate(x, src_rate / dst_rate, out_len, cutoff);
  for (auto& v : y) v = clamp_unit(v);
  return y;
}

}  // namespace detail

/// Band-limited resampling; the output length is round(n * target / source).
inline AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw std::invalid_argument("resample: target rate must be positive");
  if (target_rate == clip.sample_rate) return clip;
  const auto out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(clip.samples.size()) * target_rate / clip.sample_rate));
  AudioClip out;
  out.sample_rate = target_rate;
  out.samples = detail::resample_to_length(clip.samples, clip.sample_rate, target_rate, std::max<std::size_t>(1, out_len));
  return out;
}

// ---------------------------------------------------------------------------
// Phase vocoder

namespace detail {

struct VocoderFrames {
  std::vector<std::vector<fft::cplx>> frames;  // one-sided spectra
  std::size_t n_fft = 0;
  std::size_t hop = 0;
};

inline std::vector<double> periodic_hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

/// Index into x with numpy-style "reflect" padding, repeated as needed.
inline double reflect_at(std::span<const double> x, std::ptrdiff_t i) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  if (n == 1) return x[0];
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  if (i >= n) i = period - i;
  return x[static_cast<std::size_t>(i)];
}

inline VocoderFrames analyze(std::span<const double> x, std::size_t n_fft, std::size_t hop) {
  VocoderFrames out{{}, n_fft, hop};
  const auto window = periodic_hann(n_fft);
  const std::size_t n_frames = 1 + x.size() / hop;
  const auto pad = static_cast<std::ptrdiff_t>(n_fft / 2);
  std::vector<fft::cplx> buf(n_fft);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const auto start = static_cast<std::ptrdiff_t>(t * hop) - pad;
    for (std::size_t i = 0; i < n_fft; ++i) buf[i] = reflect_at(x, start + static_cast<std::ptrdiff_t>(i)) * window[i];
    fft::forward(buf);
    out.frames.emplace_back(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(n_fft / 2 + 1));
  }
  return out;
}

inline std::vector<double> synthesize(const std::vector<std::vector<fft::cplx>>& frames, std::size_t n_fft,
                                      std::size_t hop, std::size_t out_len) {
  const auto window = periodic_hann(n_fft);
  const std::size_t total = n_fft + hop * (frames.empty() ? 0 : frames.size() - 1);
  std::vector<double> acc(total, 0.0), norm(total, 0.0);
  std::vector<fft::cplx> buf(n_fft);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    for (std::size_t k = 0; k <= n_fft / 2; ++k) buf[k] = frames[t][k];
    for (std::size_t k = n_fft / 2 + 1; k < n_fft; ++k) buf[k] = std::conj(frames[t][n_fft - k]);
    fft::inverse(buf);
    for (std::size_t i = 0; i < n_fft; ++i) {
      acc[t * hop + i] += buf[i].real() * window[i];
      norm[t * hop + i] += window[i] * window[i];
    }
  }
  std::vector<double> y(out_len, 0.0);
  const std::size_t offset = n_fft / 2;
  for (std::size_t i = 0; i < out_len && i + offset < total; ++i) {
    const double w = norm[i + offset];
    y[i] = w > 1e-8 ? acc[i + offset] / w : 0.0;
  }
  return y;
}

inline double wrap_phase(double p) {
  return p - 2.0 * std::numbers::pi * std::round(p / (2.0 * std::numbers::pi));
}

inline std::size_t vocoder_fft_size(std::size_t n) {
  std::size_t n_fft = 1024;
  while (n_fft > 64 && n_fft > n) n_fft /= 2;
  return n_fft;
}

}  // namespace detail

/// Phase-vocoder time stretch; output length is round(n / rate), pitch kept.
inline AudioClip time_stretch(const AudioClip& clip, double rate) {
  if (!(rate >= 0.25 && rate <= 4.0)) throw std::invalid_argument("time_stretch: rate must lie in [0.25, 4]");
  if (rate == 1.0) return clip;
  const std::size_t n_fft = detail::vocoder_fft_size(clip.samples.size());
  const std::size_t hop = n_fft / 4;
  const auto spec = detail::analyze(clip.samples, n_fft, hop);
  const std::size_t n_bins = n_fft / 2 + 1;
  const std::size_t n_in = spec.frames.size();

  std::vector<double> phase(n_bins), advance(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) {
    phase[k] = std::arg(spec.frames[0][k]);
    advance[k] = 2.0 * std::numbers::pi * static_cast<double>(hop * k) / static_cast<double>(n_fft);
  }
  const std::vector<fft::cplx> silent(n_bins, fft::cplx{});
  auto frame = [&](std::size_t t) -> const std::vector<fft::cplx>& { return t < n_in ? spec.frames[t] : silent; };

  std::vector<std::vector<fft::cplx>> out;
  for (double step = 0.0; step < static_cast<double>(n_in); step += rate) {
    const auto t = static_cast<std::size_t>(step);
    const double alpha = step - static_cast<double>(t);
    const auto& a = frame(t);
    const auto& b = frame(t + 1);
    std::vector<fft::cplx> f(n_bins);
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double mag = (1.0 - alpha) * std::abs(a[k]) + alpha * std::abs(b[k]);
      f[k] = std::polar(mag, phase[k]);
      const double dphi = std::arg(b[k]) - std::arg(a[k]) - advance[k];
      phase[k] += advance[k] + detail::wrap_phase(dphi);
    }
    out.push_back(std::move(f));
  }
  const auto out_len = static_cast<std::size_t>(std::llround(static_cast<double>(clip.samples.size()) / rate));
  AudioClip result;
  result.sample_rate = clip.sample_rate;
  result.samples = detail::synthesize(out, n_fft, hop, std::max<std::size_t>(1, out_len));
  for (auto& v : result.samples) v = detail::clamp_unit(v);
  return result;
}

/// Scales every frequency by `factor` while keeping the duration.
inline AudioClip pitch_shift(const AudioClip& clip, double factor) {
  if (!(factor >= 0.25 && factor <= 4.0)) throw std::invalid_argument("pitch_shift: factor must lie in [0.25, 4]");
  if (factor == 1.0) return clip;
  const AudioClip stretched = time_stretch(clip, 1.0 / factor);
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples = detail::resample_to_length(stretched.samples, clip.sample_rate * factor, clip.sample_rate,
                                           clip.samples.size());
  return out;
}

/// The four augmentation scales applied to every training clip.
inline const std::vector<double>& default_pitch_factors() {
  static const std::vector<double> kFactors{0.75, 0.9, 1.15, 1.5};
  return kFactors;
}

// ---------------------------------------------------------------------------
// Dataset manifest

struct ManifestEntry {
  std::string source;  // file path, or "synthetic:<class>:<index>"
  int label = 0;
  int fold = 1;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> class_names;

  void validate() const {
    if (class_names.empty()) throw DataError("manifest: no classes");
    int max_fold = 0;
    std::vector<bool> seen;
    for (const auto& e : entries) {
      if (e.label < 0 || static_cast<std::size_t>(e.label) >= class_names.size())
        throw DataError("manifest: label index out of range for " + e.source);
      if (e.fold < 1) throw DataError("manifest: fold ids start at 1");
      max_fold = std::max(max_fold, e.fold);
      if (seen.size() < static_cast<std::size_t>(e.fold)) seen.resize(e.fold, false);
      seen[e.fold - 1] = true;
    }
    for (int f = 0; f < max_fold; ++f)
      if (!seen[f]) throw DataError("manifest: fold ids must be contiguous 1.." + std::to_string(max_fold));
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace detail

/// CSV with a header row containing at least `file`, `label`, `fold`.
/// Labels are either all non-negative integers (used as indices) or class
/// names, which are then indexed in lexicographic order.
inline DatasetManifest parse_manifest_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("manifest: empty file");
  if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
  const auto header = detail::split_csv_line(line);
  auto column = [&](std::string_view name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("manifest: missing column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_file = column("file"), c_label = column("label"), c_fold = column("fold");

  std::vector<std::tuple<std::string, std::string, int>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() < header.size()) throw DataError("manifest: short row '" + line + "'");
    int fold = 0;
    try {
      fold = std::stoi(f[c_fold]);
    } catch (const std::exception&) {
      throw DataError("manifest: bad fold '" + f[c_fold] + "'");
    }
    rows.emplace_back(f[c_file], f[c_label], fold);
  }

  const bool numeric = std::all_of(rows.begin(), rows.end(), [](const auto& r) {
    const auto& s = std::get<1>(r);
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
  });

  DatasetManifest m;
  std::map<std::string, int> index;
  if (numeric) {
    int max_label = -1;
    for (const auto& r : rows) max_label = std::max(max_label, std::stoi(std::get<1>(r)));
    for (int i = 0; i <= max_label; ++i) m.class_names.push_back(std::to_string(i));
  } else {
    for (const auto& r : rows) index.emplace(std::get<1>(r), 0);
    int i = 0;
    for (auto& [name, idx] : index) {
      idx = i++;
      m.class_names.push_back(name);
    }
  }
  for (const auto& [file, label, fold] : rows)
    m.entries.push_back({file, numeric ? std::stoi(label) : index.at(label), fold});
  m.validate();
  return m;
}

inline DatasetManifest load_manifest_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("manifest: cannot open " + path.string());
  return parse_manifest_csv(in);
}

// ---------------------------------------------------------------------------
// Synthetic corpus

struct SynthRecipe {
  int classes = 4;
  int clips_per_class = 50;
  double duration = 1.0;  // seconds
  int sample_rate = 8000;
  std::uint64_t seed = 7;
  int folds = 5;
};

enum class Archetype { Tone, Chirp, ModulatedNoise, HarmonicStack };

inline Archetype class_archetype(int c) { return static_cast<Archetype>(c % 4); }

/// Fundamental of class c: log-spaced between 200 Hz and min(1600 Hz, 0.12 * rate).
inline double class_fundamental(const SynthRecipe& r, int c) {
  const double lo = 200.0;
  const double hi = std::min(1600.0, 0.12 * r.sample_rate);
  if (r.classes <= 1) return lo;
  return lo * std::pow(hi / lo, static_cast<double>(c) / (r.classes - 1));
}

struct SyntheticCorpus {
  DatasetManifest manifest;
  std::vector<AudioClip> clips;  // parallel to manifest.entries
};

inline AudioClip synth_clip(const SynthRecipe& r, int c, int index) {
  Rng rng(sub_seed(r.seed, "synth:" + std::to_string(c) + ":" + std::to_string(index)));
  const auto n = static_cast<std::size_t>(std::llround(r.duration * r.sample_rate));
  const double f0 = class_fundamental(r, c) * rng.uniform(0.97, 1.03);
  const double amp = rng.uniform(0.5, 0.75);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double dt = 1.0 / r.sample_rate;
  const double two_pi = 2.0 * std::numbers::pi;

  // Band-limited noise: random-phase partials spread over one octave around f0.
  std::vector<std::pair<double, double>> partials;
  if (class_archetype(c) == Archetype::ModulatedNoise)
    for (int k = 0; k < 24; ++k)
      partials.emplace_back(f0 * std::pow(2.0, rng.uniform(-0.5, 0.5)), rng.uniform(0.0, two_pi));

  AudioClip clip;
  clip.sample_rate = r.sample_rate;
  clip.samples.resize(std::max<std::size_t>(1, n));
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    const double t = static_cast<double>(i) * dt;
    double v = 0.0;
    switch (class_archetype(c)) {
      case Archetype::Tone:
        v = std::sin(two_pi * f0 * t + phase);
        break;
      case Archetype::Chirp: {
        // linear sweep f0 -> 2 f0 over the clip
        const double k = f0 / r.duration;
        v = std::sin(two_pi * (f0 * t + 0.5 * k * t * t) + phase);
        break;
      }
      case Archetype::ModulatedNoise: {
        const double rate = 4.0 + c;
        double band = 0.0;
        for (const auto& [f, ph] : partials) band += std::sin(two_pi * f * t + ph);
        v = band / std::sqrt(0.5 * partials.size()) * 0.4 * (0.5 + 0.5 * std::sin(two_pi * rate * t + phase));
        break;
      }
      case Archetype::HarmonicStack:
        v = (std::sin(two_pi * f0 * t + phase) + 0.5 * std::sin(two_pi * 2 * f0 * t + 2 * phase) +
             0.25 * std::sin(two_pi * 3 * f0 * t + 3 * phase)) /
            1.75;
        break;
    }
    v += 0.01 * rng.normal();
    clip.samples[i] = detail::clamp_unit(amp * v);
  }
  return clip;
}

inline SyntheticCorpus synth_dataset(const SynthRecipe& r) {
  if (r.classes < 2) throw std::invalid_argument("synth_dataset: need at least two classes");
  if (r.clips_per_class < 1 || r.duration <= 0.0 || r.sample_rate <= 0 || r.folds < 1)
    throw std::invalid_argument("synth_dataset: invalid recipe");
  SyntheticCorpus out;
  for (int c = 0; c < r.classes; ++c) out.manifest.class_names.push_back("synth" + std::to_string(c));
  const int folds = std::min(r.folds, r.clips_per_class);
  for (int c = 0; c < r.classes; ++c) {
    for (int i = 0; i < r.clips_per_class; ++i) {
      out.manifest.entries.push_back({"synthetic:" + std::to_string(c) + ":" + std::to_string(i), c, 1 + i % folds});
      out.clips.push_back(synth_clip(r, c, i));
    }
  }
  return out;
}

/// Loads every manifest entry relative to `root` and resamples to `rate` when rate > 0.
inline std::vector<AudioClip> load_dataset(const DatasetManifest& m, const std::filesystem::path& root, int rate = 0) {
  std::vector<AudioClip> clips;
  clips.reserve(m.entries.size());
  for (const auto& e : m.entries) {
    AudioClip clip = load_wav(root / e.source);
    if (rate > 0) clip = resample(clip, rate);
    clips.push_back(std::move(clip));
  }
  return clips;
}

}  // namespace advspec
