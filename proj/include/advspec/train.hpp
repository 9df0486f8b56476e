#pragma once

// Training protocol: stratified dev/test split, k-fold cross-validation on the
// dev portion with early stopping, SGD with momentum on cross-entropy.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "advspec/common.hpp"
#include "advspec/model.hpp"

namespace advspec {

struct TrainConfig {
  int folds = 5;
  double train_fraction = 0.7;
  int epochs_max = 30;
  int patience = 5;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 16;
  std::uint64_t seed = 0;

  void validate() const {
    if (folds < 2) throw ConfigError("train: folds must be >= 2");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train: train_fraction must be in (0, 1)");
    if (epochs_max < 1) throw ConfigError("train: epochs_max must be >= 1");
    if (patience < 0) throw ConfigError("train: patience must be >= 0");
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must be in [0, 1)");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  }
};

/// One rendered input. `group` identifies the source clip so augmented
/// copies follow their original into the same split.
struct Sample {
  std::vector<double> pixels;
  int label = 0;
  int group = 0;
  bool augmented = false;
};

struct Split {
  std::vector<std::size_t> dev;   // originals and their augmentations
  std::vector<std::size_t> test;  // originals only
  std::vector<int> dev_fold;      // fold id (0-based) per dev entry
};

/// Stratified split over source groups: per class, round(train_fraction * n)
/// originals go to dev and are dealt round-robin into folds; augmented
/// samples join the dev set with their group's fold and never reach test.
inline Split split_dataset(const std::vector<Sample>& data, const TrainConfig& cfg, int classes) {
  cfg.validate();
  std::map<int, int> group_label;
  for (const auto& s : data)
    if (!s.augmented) group_label[s.group] = s.label;
  std::vector<std::vector<int>> by_class(classes);
  for (const auto& [g, l] : group_label) {
    if (l < 0 || l >= classes) throw DataError("train: label out of range");
    by_class[l].push_back(g);
  }
  Rng rng(sub_seed(cfg.seed, "split"));
  std::map<int, int> group_fold;  // -1 = test
  for (int c = 0; c < classes; ++c) {
    auto& groups = by_class[c];
    if (groups.size() < 2) throw ConfigError("train: class " + std::to_string(c) + " has fewer than 2 clips");
    rng.shuffle(std::span<int>(groups));
    const auto n_dev = static_cast<std::size_t>(
        std::clamp<long>(std::lround(cfg.train_fraction * groups.size()), 1, static_cast<long>(groups.size()) - 1));
    for (std::size_t i = 0; i < groups.size(); ++i)
      group_fold[groups[i]] = i < n_dev ? static_cast<int>(i % cfg.folds) : -1;
  }
  Split s;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto it = group_fold.find(data[i].group);
    if (it == group_fold.end()) continue;  // augmentation without an original
    if (it->second < 0) {
      if (!data[i].augmented) s.test.push_back(i);
    } else {
      s.dev.push_back(i);
      s.dev_fold.push_back(it->second);
    }
  }
  return s;
}

inline double accuracy(const Classifier& model, const std::vector<Sample>& data, std::span<const std::size_t> idx) {
  if (idx.empty()) return 0.0;
  std::size_t ok = 0;
  for (auto i : idx) ok += argmax(model.logits(data[i].pixels)) == data[i].label;
  return static_cast<double>(ok) / idx.size();
}

struct EpochLog {
  int fold = 0;
  int epoch = 0;
  double train_loss = 0.0;
  double val_acc = 0.0;
};

struct FoldOutcome {
  std::vector<double> parameters;
  double val_acc = 0.0;
  int epochs = 0;
};

/// Trains `model` on `train_idx` with early stopping on `val_idx`. The best
/// validation weights are restored; epochs stop once `patience` epochs pass
/// without a strict improvement.
inline FoldOutcome train_fold(MicroResNet& model, const std::vector<Sample>& data, std::vector<std::size_t> train_idx,
                              std::span<const std::size_t> val_idx, const TrainConfig& cfg, int fold,
                              std::vector<EpochLog>* log = nullptr) {
  cfg.validate();
  if (train_idx.empty()) throw ConfigError("train: empty training set");
  Rng rng(sub_seed(cfg.seed, "order:" + std::to_string(fold)));
  auto params = model.parameters();
  std::vector<double> velocity(params.size(), 0.0), grad(params.size());
  FoldOutcome best;
  best.val_acc = -1.0;
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.epochs_max; ++epoch) {
    rng.shuffle(std::span<std::size_t>(train_idx));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < train_idx.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(train_idx.size(), start + cfg.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const auto& s = data[train_idx[k]];
        loss_sum += model.loss_and_param_grad(s.pixels, s.label, grad);
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t p = 0; p < params.size(); ++p) {
        velocity[p] = cfg.momentum * velocity[p] - cfg.learning_rate * grad[p] * scale;
        params[p] += velocity[p];
      }
    }
    const double val = val_idx.empty() ? 0.0 : accuracy(model, data, val_idx);
    if (log) log->push_back({fold, epoch, loss_sum / train_idx.size(), val});
    best.epochs = epoch;
    if (val > best.val_acc) {
      best.val_acc = val;
      best.parameters.assign(params.begin(), params.end());
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= cfg.patience) break;
  }
  std::copy(best.parameters.begin(), best.parameters.end(), params.begin());
  return best;
}

/// Mean and standard deviation of all pixels in `idx`.
inline std::pair<double, double> pixel_moments(const std::vector<Sample>& data, std::span<const std::size_t> idx) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (auto i : idx)
    for (double v : data[i].pixels) sum += v, sq += v * v, ++n;
  if (n == 0) return {0.0, 1.0};
  const double mean = sum / n;
  const double var = std::max(0.0, sq / n - mean * mean);
  return {mean, var > 0.0 ? std::sqrt(var) : 1.0};
}

struct TrainReport {
  std::vector<double> fold_accuracy;
  double test_accuracy = 0.0;
  int selected_fold = 0;
  Split split;
  std::vector<EpochLog> log;
};

/// Full protocol: split, k-fold CV on dev with freshly initialized models per
/// fold, select the fold model with the best validation accuracy (lowest fold
/// on ties), report its accuracy on the held-out test set. `model` receives
/// the selected weights.
inline TrainReport train(MicroResNet& model, const std::vector<Sample>& data, const TrainConfig& cfg,
                         std::uint64_t init_seed) {
  cfg.validate();
  TrainReport rep;
  rep.split = split_dataset(data, cfg, model.num_classes());
  const auto& sp = rep.split;
  std::vector<double> best_params;
  double best_val = -1.0;
  double best_mean = 0.0, best_std = 1.0;
  for (int f = 0; f < cfg.folds; ++f) {
    std::vector<std::size_t> tr, va;
    for (std::size_t k = 0; k < sp.dev.size(); ++k) {
      const auto i = sp.dev[k];
      if (sp.dev_fold[k] != f)
        tr.push_back(i);
      else if (!data[i].augmented)
        va.push_back(i);
    }
    for (int c = 0; c < model.num_classes(); ++c)
      if (std::none_of(tr.begin(), tr.end(), [&](std::size_t i) { return data[i].label == c; }))
        throw ConfigError("train: class " + std::to_string(c) + " missing from a training fold");
    model.initialize(sub_seed(init_seed, "fold:" + std::to_string(f)));
    const auto [mean, sd] = pixel_moments(data, tr);
    model.set_input_normalization(mean, sd);
    const auto out = train_fold(model, data, tr, va, cfg, f, &rep.log);
    rep.fold_accuracy.push_back(out.val_acc);
    if (out.val_acc > best_val) {
      best_val = out.val_acc;
      best_params = out.parameters;
      best_mean = mean;
      best_std = sd;
      rep.selected_fold = f;
    }
  }
  std::copy(best_params.begin(), best_params.end(), model.parameters().begin());
  model.set_input_normalization(best_mean, best_std);
  rep.test_accuracy = accuracy(model, data, sp.test);
  return rep;
}

inline void write_train_log(std::ostream& out, const std::vector<EpochLog>& log) {
  out << "epoch,fold,train_loss,val_acc\n";
  char buf[128];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.9g,%.6f\n", e.epoch, e.fold + 1, e.train_loss, e.val_acc);
    out << buf;
  }
}

}  // namespace advspec
