#pragma once

// Experiment configuration: one JSON document, schema-versioned, unknown keys
// rejected. Every missing key takes the default shown in configs/example.json.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "advspec/attacks.hpp"
#include "advspec/audio.hpp"
#include "advspec/model.hpp"
#include "advspec/spectra.hpp"
#include "advspec/train.hpp"
#include "json.hpp"

namespace advspec {

inline constexpr int kConfigSchemaVersion = 1;

enum class RepresentationKind { Stft, Mel, Mfcc, Dwt };

inline std::string representation_name(RepresentationKind k) {
  switch (k) {
    case RepresentationKind::Stft: return "stft";
    case RepresentationKind::Mel: return "mel";
    case RepresentationKind::Mfcc: return "mfcc";
    case RepresentationKind::Dwt: return "dwt";
  }
  return "unknown";
}

struct RepresentationConfig {
  RepresentationKind kind = RepresentationKind::Mel;
  StftConfig stft;  // stft and mel
  int n_mels = 64;  // mel
  MfccConfig mfcc;
  DwtConfig dwt;
  RenderConfig render;
};

struct DatasetConfig {
  bool synthetic = true;
  SynthRecipe recipe;
  bool recipe_seed_set = false;
  std::filesystem::path manifest;  // used when !synthetic
  std::filesystem::path root;      // WAV root; defaults to the manifest's folder
  int sample_rate = 0;             // resample target for WAV corpora, 0 keeps native rates
};

struct AugmentationConfig {
  bool enabled = false;
  std::vector<double> factors = default_pitch_factors();
};

/// Budget grids. Epsilons are fractions of the intensity ceiling M.
struct AttackSuiteConfig {
  std::vector<std::string> suite{"fgsm", "bim_a", "bim_b", "jsma", "cw", "deepfool"};
  std::size_t max_items = 200;  // correctly classified test items attacked
  std::vector<double> fgsm_epsilons{0.001, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  Norm fgsm_norm = Norm::Linf;
  bool fgsm_targeted = false;
  int fgsm_search_steps = 1;
  std::vector<double> bim_epsilons{0.001, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  double bim_step_fraction = 0.25;  // alpha = fraction * epsilon
  int bim_iterations = 10;
  double jsma_gamma = 1.4 / 255.0;
  double jsma_theta = 255.0;
  std::vector<double> jsma_scaling{40, 80, 120, 160, 200};
  JsmaPolarity jsma_polarity = JsmaPolarity::Both;
  std::vector<int> cw_search_steps{1, 3, 7, 9};
  int cw_iterations = 100;
  double cw_kappa = 0.0;
  double cw_learning_rate = 0.05;
  double cw_c_init = 10.0;
  bool cw_targeted = true;
  std::vector<int> deepfool_iterations{100, 200, 300, 400, 500, 600, 700, 800, 900, 1000};
  double deepfool_overshoot = 0.02;
  Norm deepfool_norm = Norm::L2;
  DeepFoolMode deepfool_mode = DeepFoolMode::NonTargeted;
  std::vector<double> lbfgs_c{1e-2};  // initial constants; one budget point each
  int lbfgs_inner_iterations = 50;
};

struct TransferConfig {
  std::string attack = "fgsm";
  std::size_t models = 2;  // independently seeded models trained by the transfer command
};

struct ExperimentConfig {
  int schema = kConfigSchemaVersion;
  std::uint64_t seed = 7;
  std::filesystem::path output = "runs/default";
  int workers = 1;
  std::string setting = "default";  // free-form label carried into reports
  DatasetConfig dataset;
  AugmentationConfig augmentation;
  RepresentationConfig representation;
  ModelArch model;
  TrainConfig train;
  AttackSuiteConfig attacks;
  TransferConfig transfer;

  void validate() const;
};

namespace detail {

using nlohmann::json;

/// Reads object members, rejecting keys that nobody consumed.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown config key '" + path_ + "." + k + "'");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + path_ + "." + key + "' has the wrong type");
    }
  }
  const json* child(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  bool has(const std::string& key) const { return j_.contains(key); }
  std::string sub(const std::string& key) const { return path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline Norm parse_norm(const std::string& s) {
  if (s == "linf") return Norm::Linf;
  if (s == "l2") return Norm::L2;
  throw ConfigError("norm must be 'linf' or 'l2', got '" + s + "'");
}
inline std::string norm_name(Norm n) { return n == Norm::Linf ? "linf" : "l2"; }

inline Mother parse_mother(const std::string& s) {
  if (s == "haar") return Mother::Haar;
  if (s == "mexican_hat") return Mother::MexicanHat;
  if (s == "complex_morlet") return Mother::ComplexMorlet;
  throw ConfigError("unknown mother function '" + s + "'");
}
inline std::string mother_name(Mother m) {
  switch (m) {
    case Mother::Haar: return "haar";
    case Mother::MexicanHat: return "mexican_hat";
    case Mother::ComplexMorlet: return "complex_morlet";
  }
  return "unknown";
}

inline Window parse_window(const std::string& s) {
  if (s == "hann") return Window::Hann;
  if (s == "rectangular") return Window::Rectangular;
  throw ConfigError("unknown window '" + s + "'");
}
inline std::string window_name(Window w) { return w == Window::Hann ? "hann" : "rectangular"; }

inline void read_stft(Reader& r, StftConfig& c) {
  r.get("n_fft", c.n_fft);
  r.get("window_length", c.window_length);
  r.get("hop", c.hop);
  std::string w = window_name(c.window);
  r.get("window", w);
  c.window = parse_window(w);
}

inline void read_render(const json& j, const std::string& path, RenderConfig& c) {
  Reader r(j, path);
  r.get("height", c.height);
  r.get("width", c.width);
  r.get("ceiling", c.ceiling);
  r.get("log_scale", c.log_scale);
}

inline void read_representation(const json& j, RepresentationConfig& c) {
  Reader r(j, "representation");
  std::string kind = "mel";
  r.get("kind", kind);
  if (kind == "stft") {
    c.kind = RepresentationKind::Stft;
  } else if (kind == "mel") {
    c.kind = RepresentationKind::Mel;
  } else if (kind == "mfcc") {
    c.kind = RepresentationKind::Mfcc;
    c.render.log_scale = false;  // cepstra are signed
  } else if (kind == "dwt") {
    c.kind = RepresentationKind::Dwt;
  } else {
    throw ConfigError("representation.kind must be one of stft, mel, mfcc, dwt");
  }
  switch (c.kind) {
    case RepresentationKind::Stft:
      read_stft(r, c.stft);
      break;
    case RepresentationKind::Mel:
      read_stft(r, c.stft);
      r.get("n_mels", c.n_mels);
      break;
    case RepresentationKind::Mfcc:
      r.get("sample_rate", c.mfcc.sample_rate);
      r.get("n_mfcc", c.mfcc.n_mfcc);
      r.get("n_mels", c.mfcc.n_mels);
      r.get("n_fft", c.mfcc.n_fft);
      r.get("hop", c.mfcc.hop);
      r.get("dct_orthonormal", c.mfcc.dct_orthonormal);
      r.get("cepstral_filter", c.mfcc.cepstral_filter);
      break;
    case RepresentationKind::Dwt: {
      std::string m = mother_name(c.dwt.mother);
      r.get("mother", m);
      c.dwt.mother = parse_mother(m);
      r.get("sample_rate", c.dwt.sample_rate);
      r.get("frame_ms", c.dwt.frame_ms);
      r.get("overlap", c.dwt.overlap);
      r.get("scales", c.dwt.scales);
      r.get("omega0", c.dwt.omega0);
      break;
    }
  }
  if (const auto* rj = r.child("render")) read_render(*rj, "representation.render", c.render);
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::Reader;
  ExperimentConfig c;
  Reader r(j, "config");
  r.get("schema", c.schema);
  if (c.schema != kConfigSchemaVersion) throw ConfigError("unsupported config schema " + std::to_string(c.schema));
  r.get("seed", c.seed);
  std::string out = c.output.string();
  r.get("output", out);
  c.output = out;
  r.get("workers", c.workers);
  r.get("setting", c.setting);

  if (const auto* d = r.child("dataset")) {
    Reader dr(*d, "dataset");
    std::string manifest;
    dr.get("manifest", manifest);
    if (!manifest.empty()) {
      c.dataset.synthetic = false;
      c.dataset.manifest = manifest;
      std::string root;
      dr.get("root", root);
      c.dataset.root = root.empty() ? c.dataset.manifest.parent_path() : std::filesystem::path(root);
      dr.get("sample_rate", c.dataset.sample_rate);
    } else {
      dr.child("root");
      dr.child("sample_rate");
    }
    if (const auto* s = dr.child("synthetic")) {
      if (!manifest.empty()) throw ConfigError("dataset: give either a manifest or a synthetic recipe, not both");
      Reader sr(*s, "dataset.synthetic");
      auto& rc = c.dataset.recipe;
      sr.get("classes", rc.classes);
      sr.get("clips_per_class", rc.clips_per_class);
      sr.get("duration", rc.duration);
      sr.get("sample_rate", rc.sample_rate);
      sr.get("folds", rc.folds);
      c.dataset.recipe_seed_set = sr.has("seed");
      sr.get("seed", rc.seed);
    }
  }
  if (const auto* a = r.child("augmentation")) {
    Reader ar(*a, "augmentation");
    ar.get("enabled", c.augmentation.enabled);
    ar.get("factors", c.augmentation.factors);
  }
  if (const auto* rep = r.child("representation")) detail::read_representation(*rep, c.representation);
  if (const auto* m = r.child("model")) {
    Reader mr(*m, "model");
    mr.get("stem_width", c.model.stem_width);
    mr.get("stem_stride", c.model.stem_stride);
    mr.get("stem_pool", c.model.stem_pool);
    mr.get("block_widths", c.model.block_widths);
  }
  if (const auto* t = r.child("train")) {
    Reader tr(*t, "train");
    tr.get("folds", c.train.folds);
    tr.get("train_fraction", c.train.train_fraction);
    tr.get("epochs_max", c.train.epochs_max);
    tr.get("patience", c.train.patience);
    tr.get("learning_rate", c.train.learning_rate);
    tr.get("momentum", c.train.momentum);
    tr.get("batch_size", c.train.batch_size);
  }
  if (const auto* a = r.child("attacks")) {
    Reader ar(*a, "attacks");
    auto& s = c.attacks;
    ar.get("suite", s.suite);
    ar.get("max_items", s.max_items);
    if (const auto* f = ar.child("fgsm")) {
      Reader fr(*f, "attacks.fgsm");
      fr.get("epsilons", s.fgsm_epsilons);
      std::string n = detail::norm_name(s.fgsm_norm);
      fr.get("norm", n);
      s.fgsm_norm = detail::parse_norm(n);
      fr.get("targeted", s.fgsm_targeted);
      fr.get("search_steps", s.fgsm_search_steps);
    }
    if (const auto* b = ar.child("bim")) {
      Reader br(*b, "attacks.bim");
      br.get("epsilons", s.bim_epsilons);
      br.get("step_fraction", s.bim_step_fraction);
      br.get("iterations", s.bim_iterations);
    }
    if (const auto* jj = ar.child("jsma")) {
      Reader jr(*jj, "attacks.jsma");
      jr.get("gamma", s.jsma_gamma);
      jr.get("theta", s.jsma_theta);
      jr.get("scaling", s.jsma_scaling);
      std::string pol = s.jsma_polarity == JsmaPolarity::Both ? "both" : "increase";
      jr.get("polarity", pol);
      if (pol != "both" && pol != "increase") throw ConfigError("attacks.jsma.polarity must be 'both' or 'increase'");
      s.jsma_polarity = pol == "both" ? JsmaPolarity::Both : JsmaPolarity::Increase;
    }
    if (const auto* w = ar.child("cw")) {
      Reader wr(*w, "attacks.cw");
      wr.get("search_steps", s.cw_search_steps);
      wr.get("iterations", s.cw_iterations);
      wr.get("kappa", s.cw_kappa);
      wr.get("learning_rate", s.cw_learning_rate);
      wr.get("c_init", s.cw_c_init);
      wr.get("targeted", s.cw_targeted);
    }
    if (const auto* df = ar.child("deepfool")) {
      Reader dr(*df, "attacks.deepfool");
      dr.get("iterations", s.deepfool_iterations);
      dr.get("overshoot", s.deepfool_overshoot);
      std::string n = detail::norm_name(s.deepfool_norm);
      dr.get("norm", n);
      s.deepfool_norm = detail::parse_norm(n);
      std::string mode = s.deepfool_mode == DeepFoolMode::NonTargeted ? "non_targeted" : "targeted_averaged";
      dr.get("mode", mode);
      if (mode != "non_targeted" && mode != "targeted_averaged")
        throw ConfigError("attacks.deepfool.mode must be 'non_targeted' or 'targeted_averaged'");
      s.deepfool_mode = mode == "non_targeted" ? DeepFoolMode::NonTargeted : DeepFoolMode::TargetedAveraged;
    }
    if (const auto* l = ar.child("lbfgs")) {
      Reader lr(*l, "attacks.lbfgs");
      lr.get("c", s.lbfgs_c);
      lr.get("inner_iterations", s.lbfgs_inner_iterations);
    }
  }
  if (const auto* t = r.child("transfer")) {
    Reader tr(*t, "transfer");
    tr.get("attack", c.transfer.attack);
    tr.get("models", c.transfer.models);
  }
  if (!c.dataset.recipe_seed_set) c.dataset.recipe.seed = sub_seed(c.seed, "data");
  c.train.seed = sub_seed(c.seed, "split");
  c.model.classes = c.dataset.synthetic ? c.dataset.recipe.classes : 0;  // manifests fill this in at load time
  c.model.input_height = c.representation.render.height;
  c.model.input_width = c.representation.render.width;
  c.validate();
  return c;
}

inline void ExperimentConfig::validate() const {
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (dataset.synthetic) {
    if (dataset.recipe.classes < 2) throw ConfigError("dataset.synthetic.classes must be >= 2");
    if (dataset.recipe.clips_per_class < 1) throw ConfigError("dataset.synthetic.clips_per_class must be >= 1");
  } else if (!std::filesystem::exists(dataset.manifest)) {
    throw ConfigError("dataset.manifest does not exist: " + dataset.manifest.string());
  }
  for (double f : augmentation.factors)
    if (!(f >= 0.25 && f <= 4.0)) throw ConfigError("augmentation factors must lie in [0.25, 4]");
  switch (representation.kind) {
    case RepresentationKind::Stft:
    case RepresentationKind::Mel:
      representation.stft.validate();
      if (representation.kind == RepresentationKind::Mel && representation.n_mels < 1)
        throw ConfigError("representation.n_mels must be >= 1");
      break;
    case RepresentationKind::Mfcc:
      if (representation.mfcc.n_mfcc > representation.mfcc.n_mels || representation.mfcc.n_mfcc < 1)
        throw ConfigError("representation: need 1 <= n_mfcc <= n_mels");
      if (representation.mfcc.cepstral_filter < 0) throw ConfigError("representation.cepstral_filter must be >= 0");
      if (representation.render.log_scale) throw ConfigError("representation.render.log_scale is invalid for mfcc");
      break;
    case RepresentationKind::Dwt:
      representation.dwt.validate();
      break;
  }
  if (representation.render.height < 1 || representation.render.width < 1 || !(representation.render.ceiling > 0))
    throw ConfigError("representation.render: invalid shape or ceiling");
  train.validate();
  const auto& a = attacks;
  if (a.suite.empty()) throw ConfigError("attacks.suite is empty");
  for (const auto& n : a.suite) parse_attack_kind(n);
  if (a.max_items < 1) throw ConfigError("attacks.max_items must be >= 1");
  auto positive = [](const auto& grid, const char* name) {
    if (grid.empty()) throw ConfigError(std::string(name) + " is empty");
    for (auto v : grid)
      if (!(v > 0)) throw ConfigError(std::string(name) + " entries must be positive");
    auto sorted = grid;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw ConfigError(std::string(name) + " contains duplicate budgets");
  };
  positive(a.fgsm_epsilons, "attacks.fgsm.epsilons");
  if (a.fgsm_search_steps < 1) throw ConfigError("attacks.fgsm.search_steps must be >= 1");
  positive(a.bim_epsilons, "attacks.bim.epsilons");
  positive(a.jsma_scaling, "attacks.jsma.scaling");
  positive(a.cw_search_steps, "attacks.cw.search_steps");
  positive(a.deepfool_iterations, "attacks.deepfool.iterations");
  positive(a.lbfgs_c, "attacks.lbfgs.c");
  if (!(a.bim_step_fraction > 0.0) || a.bim_iterations < 1) throw ConfigError("attacks.bim: invalid step or iterations");
  if (!(a.jsma_gamma > 0.0) || !(a.jsma_theta > 0.0)) throw ConfigError("attacks.jsma: gamma and theta must be positive");
  if (a.cw_iterations < 1 || a.cw_kappa < 0.0 || !(a.cw_learning_rate > 0.0) || !(a.cw_c_init > 0.0))
    throw ConfigError("attacks.cw: invalid iterations, kappa, learning rate or c_init");
  if (a.lbfgs_inner_iterations < 1) throw ConfigError("attacks.lbfgs.inner_iterations must be >= 1");
  parse_attack_kind(transfer.attack);
  if (transfer.models < 2) throw ConfigError("transfer.models must be >= 2");
}

inline nlohmann::json read_config_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) { return parse_config(read_config_json(path)); }

/// Canonical JSON of the settings that determine the rendered inputs.
inline nlohmann::json representation_fingerprint(const ExperimentConfig& c) {
  const auto& r = c.representation;
  nlohmann::json j{{"kind", representation_name(r.kind)},
                   {"render", {{"height", r.render.height}, {"width", r.render.width}, {"ceiling", r.render.ceiling},
                               {"log_scale", r.render.log_scale}}}};
  switch (r.kind) {
    case RepresentationKind::Stft:
    case RepresentationKind::Mel:
      j["n_fft"] = r.stft.n_fft;
      j["window_length"] = r.stft.window_length;
      j["hop"] = r.stft.hop;
      j["window"] = detail::window_name(r.stft.window);
      if (r.kind == RepresentationKind::Mel) j["n_mels"] = r.n_mels;
      break;
    case RepresentationKind::Mfcc:
      j["sample_rate"] = r.mfcc.sample_rate;
      j["n_mfcc"] = r.mfcc.n_mfcc;
      j["n_mels"] = r.mfcc.n_mels;
      j["n_fft"] = r.mfcc.n_fft;
      j["hop"] = r.mfcc.hop;
      j["dct_orthonormal"] = r.mfcc.dct_orthonormal;
      j["cepstral_filter"] = r.mfcc.cepstral_filter;
      break;
    case RepresentationKind::Dwt:
      j["mother"] = detail::mother_name(r.dwt.mother);
      j["sample_rate"] = r.dwt.sample_rate;
      j["frame_ms"] = r.dwt.frame_ms;
      j["overlap"] = r.dwt.overlap;
      j["scales"] = r.dwt.scales;
      j["omega0"] = r.dwt.omega0;
      break;
  }
  return j;
}

/// Canonical JSON of the settings that determine which clips enter the cache.
inline nlohmann::json dataset_fingerprint(const ExperimentConfig& c) {
  nlohmann::json j;
  if (c.dataset.synthetic) {
    const auto& r = c.dataset.recipe;
    j["synthetic"] = {{"classes", r.classes},     {"clips_per_class", r.clips_per_class}, {"duration", r.duration},
                      {"sample_rate", r.sample_rate}, {"seed", r.seed},                   {"folds", r.folds}};
  } else {
    j["manifest"] = std::filesystem::absolute(c.dataset.manifest).lexically_normal().string();
    j["sample_rate"] = c.dataset.sample_rate;
  }
  j["augmentation"] = c.augmentation.enabled ? nlohmann::json(c.augmentation.factors) : nlohmann::json::array();
  return j;
}

}  // namespace advspec
