#pragma once

// Flat binary container for spectrograms / model inputs, plus an 8-bit
// grayscale PNG writer for inspection. Layout is documented in docs/FORMATS.md.

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "advspec/spectra.hpp"

namespace advspec {

inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr std::uint32_t kDtypeFloat32 = 1;

/// Decoded container: shape, intensity ceiling (0 for raw spectrograms) and values.
struct ArrayFile {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  float ceiling = 0.0f;
  std::vector<float> values;
};

namespace detail {

template <class T>
void put_le(std::string& out, T v) {
  static_assert(sizeof(T) == 4);
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}

template <class T>
T get_le(const unsigned char* p) {
  static_assert(sizeof(T) == 4);
  const std::uint32_t u = p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  T v;
  std::memcpy(&v, &u, 4);
  return v;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace detail

inline std::string encode_array(std::uint32_t rows, std::uint32_t cols, float ceiling, std::span<const double> values) {
  if (values.size() != static_cast<std::size_t>(rows) * cols) throw ShapeError("container: payload size mismatch");
  std::string out = "ADVS";
  detail::put_le(out, kContainerVersion);
  detail::put_le(out, kDtypeFloat32);
  detail::put_le(out, rows);
  detail::put_le(out, cols);
  detail::put_le(out, ceiling);
  out.reserve(out.size() + values.size() * 4);
  for (double v : values) detail::put_le(out, static_cast<float>(v));
  return out;
}

inline ArrayFile decode_array(std::string_view bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 24 || std::memcmp(p, "ADVS", 4) != 0) throw FormatError("container: bad magic");
  if (detail::get_le<std::uint32_t>(p + 4) != kContainerVersion) throw FormatError("container: unsupported version");
  if (detail::get_le<std::uint32_t>(p + 8) != kDtypeFloat32) throw FormatError("container: unsupported dtype");
  ArrayFile f;
  f.rows = detail::get_le<std::uint32_t>(p + 12);
  f.cols = detail::get_le<std::uint32_t>(p + 16);
  f.ceiling = detail::get_le<float>(p + 20);
  const std::size_t count = static_cast<std::size_t>(f.rows) * f.cols;
  if (bytes.size() != 24 + 4 * count) throw FormatError("container: payload size mismatch");
  f.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) f.values[i] = detail::get_le<float>(p + 24 + 4 * i);
  return f;
}

inline std::string encode_input(const ModelInput& x) {
  return encode_array(x.height, x.width, static_cast<float>(x.ceiling), x.pixels);
}

inline ModelInput decode_input(std::string_view bytes) {
  const ArrayFile f = decode_array(bytes);
  if (!(f.ceiling > 0.0f)) throw FormatError("container: not a model input (ceiling is 0)");
  ModelInput x;
  x.height = static_cast<int>(f.rows);
  x.width = static_cast<int>(f.cols);
  x.ceiling = f.ceiling;
  x.pixels.assign(f.values.begin(), f.values.end());
  return x;
}

inline void save_input(const std::filesystem::path& path, const ModelInput& x) {
  detail::write_file(path, encode_input(x));
}
inline ModelInput load_input(const std::filesystem::path& path) { return decode_input(detail::read_file(path)); }

inline void save_spectrogram(const std::filesystem::path& path, const Spectrogram& s) {
  detail::write_file(path, encode_array(static_cast<std::uint32_t>(s.rows()), static_cast<std::uint32_t>(s.cols()),
                                        0.0f, s.values.data));
}

// ---------------------------------------------------------------------------
// PNG

namespace detail {

inline void png_chunk(std::string& out, const char* type, const std::string& body) {
  auto be32 = [&](std::uint32_t v) {
    for (int i = 3; i >= 0; --i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  be32(static_cast<std::uint32_t>(body.size()));
  const std::size_t crc_from = out.size();
  out.append(type, 4);
  out += body;
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(out.data() + crc_from),
                         static_cast<uInt>(out.size() - crc_from));
  be32(static_cast<std::uint32_t>(crc));
}

}  // namespace detail

/// 8-bit grayscale PNG of `values` (row-major, rows x cols) scaled from [0, ceiling].
inline std::string encode_png(std::size_t rows, std::size_t cols, std::span<const double> values, double ceiling) {
  if (values.size() != rows * cols) throw ShapeError("png: payload size mismatch");
  std::string raw;
  raw.reserve(rows * (cols + 1));
  for (std::size_t r = 0; r < rows; ++r) {
    raw.push_back('\0');  // filter: none
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = std::clamp(values[r * cols + c] / ceiling, 0.0, 1.0);
      raw.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
  }
  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  std::string z(zlen, '\0');
  if (compress2(reinterpret_cast<Bytef*>(z.data()), &zlen, reinterpret_cast<const Bytef*>(raw.data()),
                static_cast<uLong>(raw.size()), 9) != Z_OK)
    throw Error("png: compression failed");
  z.resize(zlen);

  std::string out("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  for (std::uint32_t v : {static_cast<std::uint32_t>(cols), static_cast<std::uint32_t>(rows)})
    for (int i = 3; i >= 0; --i) ihdr.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  ihdr += std::string("\x08\x00\x00\x00\x00", 5);  // 8-bit, grayscale, deflate, no filter, no interlace
  detail::png_chunk(out, "IHDR", ihdr);
  detail::png_chunk(out, "IDAT", z);
  detail::png_chunk(out, "IEND", "");
  return out;
}

inline void save_png(const std::filesystem::path& path, const ModelInput& x) {
  detail::write_file(path, encode_png(x.height, x.width, x.pixels, x.ceiling));
}

}  // namespace advspec
