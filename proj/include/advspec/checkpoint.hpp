#pragma once

// Model checkpoint: "ADVM", u32 version, u32 metadata length, UTF-8 JSON
// metadata, u32 tensor count, then per tensor: u32 name length, name,
// u32 rank, u32 dims[rank], float32 payload. All integers little-endian.

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "advspec/model.hpp"
#include "advspec/spectra_io.hpp"
#include "json.hpp"

namespace advspec {

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline nlohmann::json arch_to_json(const ModelArch& a) {
  return {{"input_height", a.input_height}, {"input_width", a.input_width}, {"stem_width", a.stem_width},
          {"stem_stride", a.stem_stride},   {"stem_pool", a.stem_pool},     {"block_widths", a.block_widths},
          {"classes", a.classes}};
}

inline ModelArch arch_from_json(const nlohmann::json& j) {
  ModelArch a;
  a.input_height = j.at("input_height").get<int>();
  a.input_width = j.at("input_width").get<int>();
  a.stem_width = j.at("stem_width").get<int>();
  a.stem_stride = j.at("stem_stride").get<int>();
  a.stem_pool = j.at("stem_pool").get<int>();
  a.block_widths = j.at("block_widths").get<std::vector<int>>();
  a.classes = j.at("classes").get<int>();
  return a;
}

/// Rounds every parameter to float32 so the in-memory model equals what a
/// checkpoint round-trip produces.
inline void quantize_parameters(MicroResNet& m) {
  for (double& p : m.parameters()) p = static_cast<float>(p);
}

inline std::string encode_checkpoint(const MicroResNet& m, nlohmann::json extra = nlohmann::json::object()) {
  nlohmann::json meta = std::move(extra);
  meta["arch"] = arch_to_json(m.arch());
  meta["input_mean"] = m.input_mean();
  meta["input_stddev"] = m.input_stddev();
  const std::string meta_text = meta.dump();
  std::string out = "ADVM";
  detail::put_le(out, kCheckpointVersion);
  detail::put_le(out, static_cast<std::uint32_t>(meta_text.size()));
  out += meta_text;
  detail::put_le(out, static_cast<std::uint32_t>(m.tensors().size()));
  const auto params = m.parameters();
  for (const auto& t : m.tensors()) {
    detail::put_le(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    detail::put_le(out, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) detail::put_le(out, static_cast<std::uint32_t>(d));
    for (std::size_t i = 0; i < t.size; ++i) detail::put_le(out, static_cast<float>(params[t.offset + i]));
  }
  return out;
}

struct Checkpoint {
  MicroResNet model;
  nlohmann::json metadata;
};

inline Checkpoint decode_checkpoint(std::string_view bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > bytes.size()) throw FormatError("checkpoint: truncated");
  };
  auto u32 = [&] {
    need(4);
    const auto v = detail::get_le<std::uint32_t>(p + pos);
    pos += 4;
    return v;
  };
  need(4);
  if (std::memcmp(p, "ADVM", 4) != 0) throw FormatError("checkpoint: bad magic");
  pos = 4;
  if (u32() != kCheckpointVersion) throw FormatError("checkpoint: unsupported version");
  const auto meta_len = u32();
  need(meta_len);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(bytes.substr(pos, meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: bad metadata: ") + e.what());
  }
  pos += meta_len;
  MicroResNet model(arch_from_json(meta.at("arch")));
  model.set_input_normalization(meta.at("input_mean").get<double>(), meta.at("input_stddev").get<double>());
  const auto count = u32();
  if (count != model.tensors().size()) throw FormatError("checkpoint: tensor count does not match the architecture");
  auto params = model.parameters();
  for (const auto& t : model.tensors()) {
    const auto name_len = u32();
    need(name_len);
    if (bytes.substr(pos, name_len) != t.name) throw FormatError("checkpoint: unexpected tensor " + t.name);
    pos += name_len;
    const auto rank = u32();
    if (rank != t.shape.size()) throw FormatError("checkpoint: rank mismatch for " + t.name);
    for (int d : t.shape)
      if (u32() != static_cast<std::uint32_t>(d)) throw FormatError("checkpoint: shape mismatch for " + t.name);
    need(4 * t.size);
    for (std::size_t i = 0; i < t.size; ++i) params[t.offset + i] = detail::get_le<float>(p + pos + 4 * i);
    pos += 4 * t.size;
  }
  if (pos != bytes.size()) throw FormatError("checkpoint: trailing bytes");
  return {std::move(model), std::move(meta)};
}

inline void save_checkpoint(const std::filesystem::path& path, const MicroResNet& m,
                            nlohmann::json extra = nlohmann::json::object()) {
  detail::write_file(path, encode_checkpoint(m, std::move(extra)));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::read_file(path));
}

}  // namespace advspec
