#pragma once

// Command implementations behind the CLI. Each command reads and writes plain
// files under the configured output directory; layouts are in docs/FORMATS.md.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "advspec/attacks.hpp"
#include "advspec/audio.hpp"
#include "advspec/checkpoint.hpp"
#include "advspec/config.hpp"
#include "advspec/eval.hpp"
#include "advspec/spectra_io.hpp"
#include "advspec/train.hpp"
#include "json.hpp"

namespace advspec {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kCacheIndexSchema = 1;

namespace detail {

inline std::ostream& null_stream() {
  static std::ostream s(nullptr);
  return s;
}

inline void write_text(const fs::path& path, const std::string& text) { write_file(path, text); }

inline std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

inline json read_json(const fs::path& path) {
  const auto text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Data

struct LoadedAudio {
  DatasetManifest manifest;
  std::vector<AudioClip> clips;
};

inline LoadedAudio load_audio(const ExperimentConfig& cfg) {
  if (cfg.dataset.synthetic) {
    auto corpus = synth_dataset(cfg.dataset.recipe);
    return {std::move(corpus.manifest), std::move(corpus.clips)};
  }
  LoadedAudio out;
  out.manifest = load_manifest_csv(cfg.dataset.manifest);
  out.clips = load_dataset(out.manifest, cfg.dataset.root, cfg.dataset.sample_rate);
  return out;
}

inline Spectrogram compute_representation(const AudioClip& clip, const RepresentationConfig& r) {
  switch (r.kind) {
    case RepresentationKind::Stft: return stft_spectrogram(clip, r.stft);
    case RepresentationKind::Mel: return mel_spectrogram(clip, r.stft, r.n_mels);
    case RepresentationKind::Mfcc: return mfcc(clip, r.mfcc);
    case RepresentationKind::Dwt: return dwt_scalogram(clip, r.dwt);
  }
  throw std::logic_error("unhandled representation");
}

inline ModelInput prepare_input(const AudioClip& clip, const RepresentationConfig& r) {
  return render(compute_representation(clip, r), r.render);
}

// ---------------------------------------------------------------------------
// prepare

struct CacheEntry {
  std::string key;
  std::string source;
  int label = 0;
  int group = 0;
  double factor = 1.0;  // pitch factor, 1 for the original
  bool augmented = false;
};

struct CacheIndex {
  json dataset;
  json representation;
  std::vector<std::string> class_names;
  std::vector<CacheEntry> entries;
};

struct PrepareStats {
  std::size_t entries = 0;
  std::size_t computed = 0;
  std::size_t reused = 0;
};

inline fs::path cache_dir(const ExperimentConfig& cfg) { return cfg.output / "cache"; }

inline std::string cache_key(const AudioClip& clip, double factor, const json& fingerprint) {
  return Fnv1a{}
      .values(std::span<const double>(clip.samples))
      .u64(static_cast<std::uint64_t>(clip.sample_rate))
      .f64(factor)
      .text(fingerprint.dump())
      .hex();
}

inline json to_json(const CacheIndex& idx) {
  json entries = json::array();
  for (const auto& e : idx.entries)
    entries.push_back({{"key", e.key},
                       {"source", e.source},
                       {"label", e.label},
                       {"group", e.group},
                       {"factor", e.factor},
                       {"augmented", e.augmented}});
  return {{"schema", kCacheIndexSchema},
          {"dataset", idx.dataset},
          {"representation", idx.representation},
          {"class_names", idx.class_names},
          {"entries", entries}};
}

inline CacheIndex cache_index_from_json(const json& j) {
  try {
    if (j.at("schema").get<int>() != kCacheIndexSchema) throw FormatError("cache index: unsupported schema");
    CacheIndex idx;
    idx.dataset = j.at("dataset");
    idx.representation = j.at("representation");
    idx.class_names = j.at("class_names").get<std::vector<std::string>>();
    for (const auto& e : j.at("entries"))
      idx.entries.push_back({e.at("key").get<std::string>(), e.at("source").get<std::string>(), e.at("label").get<int>(),
                             e.at("group").get<int>(), e.at("factor").get<double>(), e.at("augmented").get<bool>()});
    return idx;
  } catch (const json::exception& e) {
    throw FormatError(std::string("cache index: ") + e.what());
  }
}

/// Renders one input per (clip x pitch factor) into <output>/cache/<key>.advs.
/// Entries whose file already exists are not recomputed.
inline PrepareStats cmd_prepare(const ExperimentConfig& cfg, std::ostream& log = detail::null_stream()) {
  const auto audio = load_audio(cfg);
  const auto fingerprint = representation_fingerprint(cfg);
  const auto dir = cache_dir(cfg);
  fs::create_directories(dir);
  std::vector<double> factors{1.0};
  if (cfg.augmentation.enabled)
    factors.insert(factors.end(), cfg.augmentation.factors.begin(), cfg.augmentation.factors.end());

  CacheIndex idx;
  idx.dataset = dataset_fingerprint(cfg);
  idx.representation = fingerprint;
  idx.class_names = audio.manifest.class_names;
  PrepareStats stats;
  for (std::size_t i = 0; i < audio.clips.size(); ++i) {
    const auto& clip = audio.clips[i];
    const auto& entry = audio.manifest.entries[i];
    for (std::size_t f = 0; f < factors.size(); ++f) {
      const bool augmented = f > 0;
      const auto key = cache_key(clip, augmented ? factors[f] : 1.0, fingerprint);
      const auto path = dir / (key + ".advs");
      if (fs::exists(path)) {
        ++stats.reused;
      } else {
        const AudioClip src = augmented ? pitch_shift(clip, factors[f]) : clip;
        save_input(path, prepare_input(src, cfg.representation));
        ++stats.computed;
      }
      idx.entries.push_back({key, entry.source, entry.label, static_cast<int>(i), augmented ? factors[f] : 1.0,
                             augmented});
    }
  }
  stats.entries = idx.entries.size();
  detail::write_text(dir / "index.json", detail::dump_json(to_json(idx)));
  log << "prepare: " << stats.entries << " entries (" << stats.computed << " computed, " << stats.reused
      << " reused)\n";
  return stats;
}

// ---------------------------------------------------------------------------
// Cache loading

struct CachedData {
  CacheIndex index;
  std::vector<Sample> samples;  // aligned with index.entries
};

inline CachedData load_cache(const ExperimentConfig& cfg) {
  const auto dir = cache_dir(cfg);
  const auto index_path = dir / "index.json";
  if (!fs::exists(index_path))
    throw DataError("spectrogram cache not found at " + dir.string() + "; run `advspec prepare` with this config first");
  CachedData out;
  out.index = cache_index_from_json(detail::read_json(index_path));
  if (out.index.representation != representation_fingerprint(cfg) || out.index.dataset != dataset_fingerprint(cfg))
    throw DataError("spectrogram cache at " + dir.string() +
                    " was built with a different dataset or representation config; re-run `advspec prepare`");
  for (const auto& e : out.index.entries) {
    const auto path = dir / (e.key + ".advs");
    if (!fs::exists(path)) throw DataError("cache entry " + path.string() + " is missing; re-run `advspec prepare`");
    auto x = load_input(path);
    if (x.height != cfg.representation.render.height || x.width != cfg.representation.render.width)
      throw DataError("cache entry " + path.string() + " has the wrong shape; re-run `advspec prepare`");
    out.samples.push_back({std::move(x.pixels), e.label, e.group, e.augmented});
  }
  return out;
}

inline ModelArch resolve_arch(const ExperimentConfig& cfg, const CacheIndex& idx) {
  ModelArch a = cfg.model;
  a.classes = static_cast<int>(idx.class_names.size());
  return a;
}

// ---------------------------------------------------------------------------
// train

struct TrainOutcome {
  TrainReport report;
  fs::path checkpoint;
};

inline fs::path default_checkpoint(const ExperimentConfig& cfg) { return cfg.output / "model.advm"; }

inline void write_fold_csv(std::ostream& out, const TrainReport& rep) {
  out << "fold,val_acc,selected\n";
  char buf[96];
  for (std::size_t f = 0; f < rep.fold_accuracy.size(); ++f) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%d\n", f + 1, rep.fold_accuracy[f],
                  static_cast<int>(f) == rep.selected_fold ? 1 : 0);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "test,%.17g,\n", rep.test_accuracy);
  out << buf;
}

/// Trains from the cache and writes the checkpoint plus training logs. The
/// checkpoint metadata lists the cache keys of the held-out test items.
inline TrainOutcome train_model(const ExperimentConfig& cfg, const CachedData& data, std::uint64_t init_seed,
                                const fs::path& checkpoint, const std::string& tag,
                                std::ostream& log = detail::null_stream()) {
  MicroResNet model(resolve_arch(cfg, data.index));
  TrainOutcome out;
  out.report = train(model, data.samples, cfg.train, init_seed);
  quantize_parameters(model);
  const auto& rep = out.report;
  for (std::size_t f = 0; f < rep.fold_accuracy.size(); ++f)
    log << "train" << tag << ": fold " << f + 1 << " val_acc " << rep.fold_accuracy[f] << "\n";
  log << "train" << tag << ": selected fold " << rep.selected_fold + 1 << ", test accuracy " << rep.test_accuracy << "\n";

  std::vector<std::string> test_keys;
  for (auto i : rep.split.test) test_keys.push_back(data.index.entries[i].key);
  json meta{{"representation", data.index.representation},
            {"class_names", data.index.class_names},
            {"seed", cfg.seed},
            {"init_seed", init_seed},
            {"selected_fold", rep.selected_fold + 1},
            {"fold_accuracy", rep.fold_accuracy},
            {"test_accuracy", rep.test_accuracy},
            {"test_keys", test_keys}};
  save_checkpoint(checkpoint, model, std::move(meta));
  out.checkpoint = checkpoint;
  return out;
}

inline TrainOutcome cmd_train(const ExperimentConfig& cfg, std::ostream& log = detail::null_stream()) {
  const auto data = load_cache(cfg);
  auto out = train_model(cfg, data, sub_seed(cfg.seed, "init"), default_checkpoint(cfg), "", log);
  std::ostringstream tl, fa;
  write_train_log(tl, out.report.log);
  write_fold_csv(fa, out.report);
  detail::write_text(cfg.output / "train_log.csv", tl.str());
  detail::write_text(cfg.output / "fold_accuracy.csv", fa.str());
  return out;
}

// ---------------------------------------------------------------------------
// attack

/// One budget of one attack: the raw budget value and the parameters it maps to.
struct BudgetedSpec {
  double budget = 0.0;
  AttackSpec spec;
};

namespace detail {

template <class T>
std::vector<T> ascending_unique(std::vector<T> v, const std::string& what) {
  std::sort(v.begin(), v.end());
  if (std::adjacent_find(v.begin(), v.end()) != v.end()) throw ConfigError(what + " contains duplicate budgets");
  return v;
}

}  // namespace detail

/// Expands an attack's budget grid into one spec per budget, in increasing
/// budget order. `pixels` and `ceiling` describe the model input.
inline std::vector<BudgetedSpec> budget_specs(AttackKind kind, const AttackSuiteConfig& a, std::size_t pixels,
                                              double ceiling) {
  std::vector<BudgetedSpec> out;
  AttackSpec base;
  base.kind = kind;
  switch (kind) {
    case AttackKind::Fgsm:
      base.targeted = a.fgsm_targeted;
      base.fgsm.norm = a.fgsm_norm;
      base.fgsm.search_steps = a.fgsm_search_steps;
      for (double e : detail::ascending_unique(a.fgsm_epsilons, "attacks.fgsm.epsilons")) {
        auto s = base;
        s.fgsm.epsilon = e * ceiling;
        out.push_back({e, s});
      }
      break;
    case AttackKind::BimA:
    case AttackKind::BimB:
      base.bim.variant = kind == AttackKind::BimA ? BimVariant::A : BimVariant::B;
      base.bim.max_iters = a.bim_iterations;
      for (double e : detail::ascending_unique(a.bim_epsilons, "attacks.bim.epsilons")) {
        auto s = base;
        s.bim.epsilon = e * ceiling;
        s.bim.step = a.bim_step_fraction * e * ceiling;
        out.push_back({e, s});
      }
      break;
    case AttackKind::Jsma: {
      base.jsma.gamma = a.jsma_gamma;
      base.jsma.theta = a.jsma_theta;
      base.jsma.polarity = a.jsma_polarity;
      std::vector<int> caps;
      for (double n : a.jsma_scaling) caps.push_back(jsma_iteration_cap(pixels, a.jsma_gamma, n));
      for (int cap : detail::ascending_unique(caps, "attacks.jsma.scaling")) {
        auto s = base;
        s.jsma.iter_cap = cap;
        out.push_back({static_cast<double>(cap), s});
      }
      break;
    }
    case AttackKind::CarliniWagner:
      base.targeted = a.cw_targeted;
      base.cw.kappa = a.cw_kappa;
      base.cw.iters_per_step = a.cw_iterations;
      base.cw.learning_rate = a.cw_learning_rate;
      base.cw.c_init = a.cw_c_init;
      for (int steps : detail::ascending_unique(a.cw_search_steps, "attacks.cw.search_steps")) {
        auto s = base;
        s.cw.search_steps = steps;
        out.push_back({static_cast<double>(steps), s});
      }
      break;
    case AttackKind::DeepFool:
      base.deepfool_mode = a.deepfool_mode;
      base.deepfool.norm = a.deepfool_norm;
      base.deepfool.overshoot = a.deepfool_overshoot;
      for (int it : detail::ascending_unique(a.deepfool_iterations, "attacks.deepfool.iterations")) {
        auto s = base;
        s.deepfool.max_iters = it;
        out.push_back({static_cast<double>(it), s});
      }
      break;
    case AttackKind::Lbfgs:
      base.lbfgs.inner_iters = a.lbfgs_inner_iterations;
      for (double c : detail::ascending_unique(a.lbfgs_c, "attacks.lbfgs.c")) {
        auto s = base;
        s.lbfgs.c_init = c;
        out.push_back({c, s});
      }
      break;
  }
  return out;
}

struct AttackItems {
  std::vector<std::vector<double>> pixels;
  std::vector<int> labels;
  std::vector<std::string> keys;
  double clean_accuracy = 0.0;
};

/// Held-out test items of a checkpoint that it classifies correctly, at most
/// `max_items` of them (a seeded subsample, kept in cache order).
inline AttackItems attack_items(const Checkpoint& ck, const CachedData& data, std::size_t max_items,
                                std::uint64_t seed) {
  std::map<std::string, std::size_t> by_key;
  for (std::size_t i = 0; i < data.index.entries.size(); ++i) by_key.emplace(data.index.entries[i].key, i);
  std::vector<std::size_t> test, correct;
  try {
    for (const auto& k : ck.metadata.at("test_keys")) {
      const auto it = by_key.find(k.get<std::string>());
      if (it == by_key.end()) throw DataError("checkpoint test item " + k.get<std::string>() + " is not in the cache");
      test.push_back(it->second);
    }
  } catch (const json::exception&) {
    throw FormatError("checkpoint metadata has no test_keys list");
  }
  if (test.empty()) throw DataError("checkpoint lists no test items");
  for (auto i : test)
    if (argmax(ck.model.logits(data.samples[i].pixels)) == data.samples[i].label) correct.push_back(i);
  AttackItems out;
  out.clean_accuracy = static_cast<double>(correct.size()) / test.size();
  if (correct.size() > max_items) {
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(correct));
    correct.resize(max_items);
    std::sort(correct.begin(), correct.end());
  }
  for (auto i : correct) {
    out.pixels.push_back(data.samples[i].pixels);
    out.labels.push_back(data.samples[i].label);
    out.keys.push_back(data.index.entries[i].key);
  }
  return out;
}

inline std::vector<BatchItem> batch_of(const AttackItems& items) {
  std::vector<BatchItem> b;
  for (std::size_t i = 0; i < items.pixels.size(); ++i) b.push_back({items.pixels[i], items.labels[i]});
  return b;
}

inline void check_compatible(const Checkpoint& ck, const ExperimentConfig& cfg, const CachedData& data) {
  const auto& a = ck.model.arch();
  if (a.input_height != cfg.representation.render.height || a.input_width != cfg.representation.render.width)
    throw DataError("checkpoint input shape " + std::to_string(a.input_height) + "x" + std::to_string(a.input_width) +
                    " does not match the cache");
  if (a.classes != static_cast<int>(data.index.class_names.size()))
    throw DataError("checkpoint class count does not match the cache");
  if (ck.metadata.contains("representation") && ck.metadata.at("representation") != data.index.representation)
    throw DataError("checkpoint was trained on a different representation");
}

inline json result_json(const AttackResult& r, double budget, const std::string& key) {
  json j{{"attack", r.attack},
         {"budget", budget},
         {"item", r.item},
         {"key", key},
         {"true_label", r.true_label},
         {"target_label", r.target_label ? json(*r.target_label) : json(nullptr)},
         {"predicted_label", r.predicted_label},
         {"success", r.success},
         {"l0", r.l0},
         {"l2", r.l2},
         {"linf", r.linf},
         {"gradient_calls", r.gradient_calls},
         {"iterations_used", r.iterations_used},
         {"degenerate", r.degenerate}};
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

struct AttackRunResult {
  RobustnessReport report;
  /// per attack, per budget, the batch results
  std::vector<std::vector<std::vector<AttackResult>>> results;
};

/// Runs the configured suite against one checkpoint and writes results.jsonl,
/// report.json, report.csv and curves.csv into the output directory.
inline AttackRunResult cmd_attack(const ExperimentConfig& cfg, const fs::path& checkpoint,
                                  std::ostream& log = detail::null_stream()) {
  const auto data = load_cache(cfg);
  if (!fs::exists(checkpoint)) throw DataError("checkpoint " + checkpoint.string() + " not found; run `advspec train`");
  const auto ck = load_checkpoint(checkpoint);
  check_compatible(ck, cfg, data);
  const auto items = attack_items(ck, data, cfg.attacks.max_items, sub_seed(cfg.seed, "attack-items"));
  if (items.pixels.empty()) throw DataError("no correctly classified test items to attack");
  const auto batch = batch_of(items);
  const auto target_seed = sub_seed(cfg.seed, "attack-targets");
  const double ceiling = cfg.representation.render.ceiling;
  const std::size_t pixels = items.pixels.front().size();

  AttackRunResult out;
  auto& rep = out.report;
  rep.representation = representation_name(cfg.representation.kind);
  rep.setting = cfg.setting;
  rep.clean_accuracy = items.clean_accuracy;
  rep.seed = cfg.seed;
  rep.target_seed = target_seed;
  std::ostringstream jsonl;
  for (const auto& name : cfg.attacks.suite) {
    const auto kind = parse_attack_kind(name);
    const auto specs = budget_specs(kind, cfg.attacks, pixels, ceiling);
    std::vector<double> budgets;
    std::vector<std::vector<AttackResult>> per_budget;
    for (const auto& bs : specs) {
      auto outcome = run_attack_batch(ck.model, batch, bs.spec, target_seed, cfg.workers, ceiling);
      log << "attack " << name << " budget " << bs.budget << ": fooling rate "
          << fooling_rate(outcome.results).rate << ", mean calls " << outcome.mean_calls() << "\n";
      for (const auto& r : outcome.results) jsonl << result_json(r, bs.budget, items.keys[r.item]).dump() << "\n";
      budgets.push_back(bs.budget);
      per_budget.push_back(std::move(outcome.results));
    }
    rep.rows.push_back(make_attack_row(name, budgets, per_budget));
    log << "attack " << name << ": auc " << rep.rows.back().auc << "\n";
    out.results.push_back(std::move(per_budget));
  }
  std::ostringstream csv, curves;
  write_report_csv(csv, rep);
  write_curves_csv(curves, rep);
  detail::write_text(cfg.output / "results.jsonl", jsonl.str());
  detail::write_text(cfg.output / "report.json", detail::dump_json(to_json(rep)));
  detail::write_text(cfg.output / "report.csv", csv.str());
  detail::write_text(cfg.output / "curves.csv", curves.str());
  return out;
}

// ---------------------------------------------------------------------------
// transfer

struct TransferOutcome {
  TransferMatrix matrix;
  std::vector<std::vector<double>> baseline;  // permutation-label baseline, same layout
  std::vector<double> budgets;
};

/// Crafts the transfer attack on every source model over its budget grid and
/// scores each (source, target) pair; ratios are averaged over the budgets at
/// which the source produced at least one success. When `checkpoints` is
/// empty, `transfer.models` models are trained from independent init seeds.
inline TransferOutcome cmd_transfer(const ExperimentConfig& cfg, std::vector<fs::path> checkpoints,
                                    std::ostream& log = detail::null_stream()) {
  const auto data = load_cache(cfg);
  if (checkpoints.empty()) {
    for (std::size_t k = 0; k < cfg.transfer.models; ++k) {
      const auto path = cfg.output / "transfer" / ("model" + std::to_string(k) + ".advm");
      train_model(cfg, data, sub_seed(cfg.seed, "transfer-init:" + std::to_string(k)), path,
                  " [model" + std::to_string(k) + "]", log);
      checkpoints.push_back(path);
    }
  }
  if (checkpoints.size() < 2) throw ConfigError("transfer needs at least two checkpoints");
  std::vector<Checkpoint> models;
  std::vector<std::string> ids;
  for (const auto& p : checkpoints) {
    if (!fs::exists(p)) throw DataError("checkpoint " + p.string() + " not found");
    models.push_back(load_checkpoint(p));
    check_compatible(models.back(), cfg, data);
    ids.push_back(p.stem().string());
    if (std::count(ids.begin(), ids.end(), ids.back()) > 1) ids.back() += "_" + std::to_string(ids.size() - 1);
  }
  std::vector<const Classifier*> ptrs;
  for (const auto& m : models) ptrs.push_back(&m.model);

  const auto kind = parse_attack_kind(cfg.transfer.attack);
  const double ceiling = cfg.representation.render.ceiling;
  const std::size_t n = models.size();
  std::vector<AttackItems> items;
  for (const auto& m : models)
    items.push_back(attack_items(m, data, cfg.attacks.max_items, sub_seed(cfg.seed, "attack-items")));
  auto specs = budget_specs(kind, cfg.attacks, items.front().pixels.front().size(), ceiling);
  // one-shot FGSM at each epsilon; the step search would stop at the source's boundary
  for (auto& bs : specs) bs.spec.fgsm.search_steps = 1;

  TransferOutcome out;
  std::vector<std::vector<double>> sum(n, std::vector<double>(n, 0.0)), base(n, std::vector<double>(n, 0.0));
  std::vector<std::size_t> used(n, 0);
  for (const auto& bs : specs) {
    out.budgets.push_back(bs.budget);
    std::vector<std::vector<AttackResult>> results(n);
    for (std::size_t s = 0; s < n; ++s) {
      if (items[s].pixels.empty()) continue;
      results[s] = run_attack_batch(models[s].model, batch_of(items[s]), bs.spec,
                                    sub_seed(cfg.seed, "attack-targets"), cfg.workers, ceiling)
                       .results;
    }
    const auto m = transfer_matrix(ids, ptrs, results);
    for (std::size_t s = 0; s < n; ++s) {
      if (std::none_of(results[s].begin(), results[s].end(), [](const AttackResult& r) { return r.success; }))
        continue;
      ++used[s];
      for (std::size_t t = 0; t < n; ++t) {
        sum[s][t] += m.cells[s][t];
        base[s][t] += permutation_baseline(results[s], *ptrs[t], sub_seed(cfg.seed, "transfer"));
      }
    }
  }
  out.matrix.ids = ids;
  out.matrix.cells.assign(n, std::vector<double>(n, 0.0));
  out.baseline.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t t = 0; t < n; ++t) {
      out.matrix.cells[s][t] = s == t ? 1.0 : (used[s] ? sum[s][t] / used[s] : 0.0);
      out.baseline[s][t] = used[s] ? base[s][t] / used[s] : 0.0;
    }
  out.matrix.validate();
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t t = 0; t < n; ++t)
      if (s != t)
        log << "transfer " << ids[s] << " -> " << ids[t] << ": " << out.matrix.cells[s][t] << " (baseline "
            << out.baseline[s][t] << ")\n";

  std::ostringstream csv;
  write_transfer_csv(csv, out.matrix);
  detail::write_text(cfg.output / "transfer.csv", csv.str());
  json j{{"schema", kReportSchemaVersion},
         {"attack", attack_name(kind)},
         {"budgets", out.budgets},
         {"ids", ids},
         {"cells", out.matrix.cells},
         {"baseline", out.baseline}};
  detail::write_text(cfg.output / "transfer.json", detail::dump_json(j));
  return out;
}

// ---------------------------------------------------------------------------
// report

struct SummaryOutcome {
  std::vector<RobustnessReport> reports;
  std::vector<fs::path> sources;
};

/// One row per report in a wide table layout: setting, accuracy, then the
/// AUC and mean gradient cost of every attack seen in any report.
inline void write_summary_table(std::ostream& out, const std::vector<RobustnessReport>& reports) {
  std::vector<std::string> attacks;
  for (const auto& r : reports)
    for (const auto& row : r.rows)
      if (std::find(attacks.begin(), attacks.end(), row.attack) == attacks.end()) attacks.push_back(row.attack);
  out << "representation,setting,clean_accuracy";
  for (const auto& a : attacks) out << ",auc_" << a << ",cost_" << a;
  out << "\n";
  char buf[64];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%.17g", r.clean_accuracy);
    out << r.representation << "," << r.setting << "," << buf;
    for (const auto& a : attacks) {
      const auto it = std::find_if(r.rows.begin(), r.rows.end(), [&](const AttackRow& x) { return x.attack == a; });
      if (it == r.rows.end()) {
        out << ",,";
        continue;
      }
      std::snprintf(buf, sizeof buf, ",%.17g", it->auc);
      out << buf;
      std::snprintf(buf, sizeof buf, ",%.17g", it->cost.mean);
      out << buf;
    }
    out << "\n";
  }
}

/// Merges every report.json below `run_dir` (sorted by path) into
/// summary.csv, summary_table.csv, summary_curves.csv and summary.json.
inline SummaryOutcome cmd_report(const fs::path& run_dir, std::ostream& log = detail::null_stream()) {
  if (!fs::is_directory(run_dir)) throw DataError("run directory " + run_dir.string() + " does not exist");
  SummaryOutcome out;
  for (const auto& e : fs::recursive_directory_iterator(run_dir))
    if (e.is_regular_file() && e.path().filename() == "report.json") out.sources.push_back(e.path());
  std::sort(out.sources.begin(), out.sources.end());
  if (out.sources.empty()) throw DataError("no report.json found under " + run_dir.string());
  json all = json::array();
  std::ostringstream csv, curves;
  csv << kReportCsvHeader << "\n";
  curves << "representation,setting,attack,budget,normalized_budget,fooling_rate\n";
  for (const auto& p : out.sources) {
    auto j = detail::read_json(p);
    RobustnessReport r;
    try {
      r = report_from_json(j);
    } catch (const json::exception& e) {
      throw FormatError(p.string() + ": " + e.what());
    }
    write_report_csv(csv, r, false);
    char buf[256];
    for (const auto& a : r.rows)
      for (std::size_t i = 0; i < a.curve.size(); ++i) {
        std::snprintf(buf, sizeof buf, ",%s,%.17g,%.17g,%.17g\n", a.attack.c_str(), a.budgets[i], a.curve[i].budget,
                      a.curve[i].rate);
        curves << r.representation << "," << r.setting << buf;
      }
    all.push_back(to_json(r));
    out.reports.push_back(std::move(r));
  }
  std::ostringstream table;
  write_summary_table(table, out.reports);
  detail::write_text(run_dir / "summary.csv", csv.str());
  detail::write_text(run_dir / "summary_table.csv", table.str());
  detail::write_text(run_dir / "summary_curves.csv", curves.str());
  detail::write_text(run_dir / "summary.json", detail::dump_json({{"schema", kReportSchemaVersion}, {"reports", all}}));
  log << "report: merged " << out.reports.size() << " report(s)\n";
  return out;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepCell {
  std::string name;
  json patch;  // JSON merge patch applied to the base config
};

struct SweepOutcome {
  std::vector<RobustnessReport> reports;
  std::vector<std::pair<std::string, std::string>> skipped;  // cell, reason
};

/// For every cell: patch the base config, run prepare, train and attack under
/// <base output>/<cell name>, then merge everything with cmd_report. A failing
/// cell is skipped with its reason logged.
inline SweepOutcome sweep(const json& base, const std::vector<SweepCell>& grid,
                          std::ostream& log = detail::null_stream()) {
  if (grid.empty()) throw ConfigError("sweep: grid is empty");
  const auto root = parse_config(base).output;
  SweepOutcome out;
  for (const auto& cell : grid) {
    try {
      json j = base;
      j.merge_patch(cell.patch);
      j["output"] = (root / cell.name).string();
      if (!cell.patch.contains("setting")) j["setting"] = cell.name;
      const auto cfg = parse_config(j);
      log << "sweep: cell " << cell.name << "\n";
      cmd_prepare(cfg, log);
      const auto trained = cmd_train(cfg, log);
      out.reports.push_back(cmd_attack(cfg, trained.checkpoint, log).report);
    } catch (const Error& e) {
      log << "sweep: skipping cell " << cell.name << ": " << e.what() << "\n";
      out.skipped.emplace_back(cell.name, e.what());
    }
  }
  if (!out.reports.empty()) cmd_report(root, log);
  return out;
}

inline std::vector<SweepCell> parse_sweep_grid(const json& j) {
  if (!j.is_object() || !j.contains("cells") || !j.at("cells").is_array())
    throw ConfigError("sweep grid: expected {\"cells\": [{\"name\": ..., \"patch\": {...}}, ...]}");
  std::vector<SweepCell> grid;
  for (const auto& c : j.at("cells")) {
    if (!c.is_object() || !c.contains("name") || !c.at("name").is_string())
      throw ConfigError("sweep grid: every cell needs a string name");
    for (const auto& [k, v] : c.items())
      if (k != "name" && k != "patch") throw ConfigError("sweep grid: unknown cell key '" + k + "'");
    grid.push_back({c.at("name").get<std::string>(), c.value("patch", json::object())});
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
      if (grid[i].name == grid.back().name) throw ConfigError("sweep grid: duplicate cell name '" + grid.back().name + "'");
  }
  if (grid.empty()) throw ConfigError("sweep grid: no cells");
  return grid;
}

}  // namespace advspec
