#pragma once

// Robustness metrics: fooling rate, budget-AUC, attack cost statistics,
// transferability, and the report schema with CSV/JSON round-trips.

#include <algorithm>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "advspec/attacks.hpp"
#include "json.hpp"

namespace advspec {

inline constexpr int kReportSchemaVersion = 1;

struct FoolingRate {
  double rate = 0.0;
  double robustness = 1.0;
};

inline FoolingRate fooling_rate(std::span<const AttackResult> results) {
  if (results.empty()) throw DataError("fooling_rate: empty result list");
  const auto ok = std::count_if(results.begin(), results.end(), [](const AttackResult& r) { return r.success; });
  FoolingRate f;
  f.rate = static_cast<double>(ok) / static_cast<double>(results.size());
  f.robustness = 1.0 - f.rate;
  return f;
}

struct BudgetPoint {
  double budget = 0.0;  // normalized to [0, 1]
  double rate = 0.0;
  bool operator==(const BudgetPoint&) const = default;
};

using BudgetCurve = std::vector<BudgetPoint>;

/// Budgets b_i / max_j b_j.
inline std::vector<double> normalize_budgets(std::span<const double> budgets) {
  if (budgets.empty()) throw ConfigError("budget grid is empty");
  const double top = *std::max_element(budgets.begin(), budgets.end());
  if (!(top > 0.0)) throw ConfigError("budget grid must contain a positive value");
  std::vector<double> out;
  for (double b : budgets) out.push_back(b / top);
  return out;
}

/// Trapezoidal area after extending the curve flat to budget 0 and budget 1.
inline double auc_over_budget(const BudgetCurve& curve) {
  if (curve.size() < 2) throw DataError("auc_over_budget: need at least two points");
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const auto& p = curve[i];
    if (p.budget < 0.0 || p.budget > 1.0 || p.rate < 0.0 || p.rate > 1.0)
      throw DataError("auc_over_budget: point outside the unit square");
    if (i > 0 && !(p.budget > curve[i - 1].budget)) throw DataError("auc_over_budget: budgets must increase");
  }
  BudgetCurve ext;
  ext.push_back({0.0, curve.front().rate});
  ext.insert(ext.end(), curve.begin(), curve.end());
  ext.push_back({1.0, curve.back().rate});
  double area = 0.0;
  for (std::size_t i = 1; i < ext.size(); ++i)
    area += (ext[i].budget - ext[i - 1].budget) * 0.5 * (ext[i].rate + ext[i - 1].rate);
  return area;
}

struct CostStats {
  double mean = 0.0;
  double median = 0.0;
  std::uint64_t max = 0;
  bool operator==(const CostStats&) const = default;
};

/// Statistics of per-item gradient callbacks; the median of an even count is
/// the mean of the two middle values.
inline CostStats cost_stats(std::span<const std::uint64_t> calls) {
  if (calls.empty()) throw DataError("cost_stats: empty batch");
  std::vector<std::uint64_t> v(calls.begin(), calls.end());
  std::sort(v.begin(), v.end());
  CostStats s;
  s.mean = static_cast<double>(std::accumulate(v.begin(), v.end(), std::uint64_t{0})) / v.size();
  const std::size_t mid = v.size() / 2;
  s.median = v.size() % 2 ? static_cast<double>(v[mid]) : 0.5 * (static_cast<double>(v[mid - 1]) + v[mid]);
  s.max = v.back();
  return s;
}

inline CostStats cost_stats(std::span<const AttackResult> results) {
  std::vector<std::uint64_t> calls;
  for (const auto& r : results) calls.push_back(r.gradient_calls);
  return cost_stats(calls);
}

/// Whether x_adv fools `target` under the source attack's success rule.
inline bool fools(const Classifier& target, const AttackResult& r) {
  const int p = argmax(target.logits(r.x_adv));
  return r.target_label ? p == *r.target_label : p != r.true_label;
}

/// Fraction of successful source adversarials that also fool `target`.
inline double transferability(std::span<const AttackResult> source, const Classifier& target) {
  std::size_t n = 0, hit = 0;
  for (const auto& r : source) {
    if (!r.success) continue;
    ++n;
    hit += fools(target, r);
  }
  if (n == 0) throw DataError("transferability: source has no successful adversarials");
  return static_cast<double>(hit) / n;
}

/// Chance baseline: the same successful adversarials scored against the target
/// after replacing every reference label (true or target) with one drawn from
/// a seeded permutation of the reference labels.
inline double permutation_baseline(std::span<const AttackResult> source, const Classifier& target,
                                   std::uint64_t seed) {
  std::vector<AttackResult> ok;
  for (const auto& r : source)
    if (r.success) ok.push_back(r);
  if (ok.empty()) throw DataError("transferability: source has no successful adversarials");
  std::vector<int> labels;
  for (const auto& r : ok) labels.push_back(r.target_label.value_or(r.true_label));
  Rng rng(seed);
  rng.shuffle(std::span<int>(labels));
  std::size_t hit = 0;
  for (std::size_t i = 0; i < ok.size(); ++i) {
    const int p = argmax(target.logits(ok[i].x_adv));
    hit += ok[i].target_label ? p == labels[i] : p != labels[i];
  }
  return static_cast<double>(hit) / ok.size();
}

struct TransferMatrix {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> cells;  // cells[source][target]

  void validate() const {
    if (cells.size() != ids.size()) throw DataError("transfer matrix: size mismatch");
    for (std::size_t s = 0; s < cells.size(); ++s) {
      if (cells[s].size() != ids.size()) throw DataError("transfer matrix: not square");
      if (cells[s][s] != 1.0) throw DataError("transfer matrix: diagonal must be 1");
      for (double v : cells[s])
        if (!(v >= 0.0 && v <= 1.0)) throw DataError("transfer matrix: entry outside [0, 1]");
    }
  }
};

/// cells[s][t] = transferability of results[s] onto models[t]; the diagonal is 1
/// by definition, and an empty source row (no successes) is reported as 0.
inline TransferMatrix transfer_matrix(std::vector<std::string> ids, std::span<const Classifier* const> models,
                                      const std::vector<std::vector<AttackResult>>& results) {
  if (ids.size() != models.size() || results.size() != models.size())
    throw DataError("transfer matrix: ids, models and results must align");
  TransferMatrix m;
  m.ids = std::move(ids);
  m.cells.assign(models.size(), std::vector<double>(models.size(), 0.0));
  for (std::size_t s = 0; s < models.size(); ++s) {
    const bool any = std::any_of(results[s].begin(), results[s].end(), [](const AttackResult& r) { return r.success; });
    for (std::size_t t = 0; t < models.size(); ++t)
      m.cells[s][t] = s == t ? 1.0 : (any ? transferability(results[s], *models[t]) : 0.0);
  }
  return m;
}

inline void write_transfer_csv(std::ostream& out, const TransferMatrix& m) {
  out << "source";
  for (const auto& id : m.ids) out << ',' << id;
  out << '\n';
  char buf[64];
  for (std::size_t s = 0; s < m.ids.size(); ++s) {
    out << m.ids[s];
    for (double v : m.cells[s]) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out << buf;
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Report

struct AttackRow {
  std::string attack;
  double fooling_rate = 0.0;
  double robustness = 1.0;
  double auc = 0.0;
  CostStats cost;  // over per-batch mean gradient calls
  std::size_t items = 0;
  std::vector<double> budgets;  // raw budget grid
  BudgetCurve curve;
  bool operator==(const AttackRow&) const = default;
};

struct RobustnessReport {
  int schema = kReportSchemaVersion;
  std::string representation;
  std::string setting;
  double clean_accuracy = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t target_seed = 0;  // seed of the random target-label draws
  std::vector<AttackRow> rows;
  bool operator==(const RobustnessReport&) const = default;
};

/// Per-attack row from per-budget batches of results. The reported fooling
/// rate is the mean over budgets; cost statistics are taken over batch means.
inline AttackRow make_attack_row(const std::string& attack, std::span<const double> budgets,
                                 const std::vector<std::vector<AttackResult>>& per_budget) {
  if (per_budget.size() != budgets.size()) throw DataError("report: one result batch per budget is required");
  AttackRow row;
  row.attack = attack;
  row.budgets.assign(budgets.begin(), budgets.end());
  const auto norm = normalize_budgets(budgets);
  std::vector<std::uint64_t> batch_means;
  std::vector<double> means;
  double rate_sum = 0.0;
  for (std::size_t b = 0; b < budgets.size(); ++b) {
    const auto f = fooling_rate(per_budget[b]);
    row.curve.push_back({norm[b], f.rate});
    rate_sum += f.rate;
    means.push_back(cost_stats(per_budget[b]).mean);
    row.items += per_budget[b].size();
  }
  row.fooling_rate = rate_sum / budgets.size();
  row.robustness = 1.0 - row.fooling_rate;
  row.auc = row.curve.size() >= 2 ? auc_over_budget(row.curve) : row.curve.front().rate;
  std::vector<double> sorted = means;
  std::sort(sorted.begin(), sorted.end());
  row.cost.mean = std::accumulate(means.begin(), means.end(), 0.0) / means.size();
  const std::size_t mid = sorted.size() / 2;
  row.cost.median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  std::uint64_t mx = 0;
  for (const auto& batch : per_budget)
    for (const auto& r : batch) mx = std::max(mx, r.gradient_calls);
  row.cost.max = mx;
  return row;
}

inline nlohmann::json to_json(const RobustnessReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& a : r.rows) {
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& p : a.curve) curve.push_back({p.budget, p.rate});
    rows.push_back({{"attack", a.attack},
                    {"fooling_rate", a.fooling_rate},
                    {"robustness", a.robustness},
                    {"auc", a.auc},
                    {"cost_mean", a.cost.mean},
                    {"cost_median", a.cost.median},
                    {"cost_max", a.cost.max},
                    {"items", a.items},
                    {"budgets", a.budgets},
                    {"curve", curve}});
  }
  return {{"schema", r.schema},
          {"representation", r.representation},
          {"setting", r.setting},
          {"clean_accuracy", r.clean_accuracy},
          {"seed", r.seed},
          {"target_seed", r.target_seed},
          {"attacks", rows}};
}

inline RobustnessReport report_from_json(const nlohmann::json& j) {
  RobustnessReport r;
  try {
    r.schema = j.at("schema").get<int>();
    if (r.schema != kReportSchemaVersion) throw FormatError("report: unsupported schema " + std::to_string(r.schema));
    r.representation = j.at("representation").get<std::string>();
    r.setting = j.at("setting").get<std::string>();
    r.clean_accuracy = j.at("clean_accuracy").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.target_seed = j.at("target_seed").get<std::uint64_t>();
    for (const auto& a : j.at("attacks")) {
      AttackRow row;
      row.attack = a.at("attack").get<std::string>();
      row.fooling_rate = a.at("fooling_rate").get<double>();
      row.robustness = a.at("robustness").get<double>();
      row.auc = a.at("auc").get<double>();
      row.cost.mean = a.at("cost_mean").get<double>();
      row.cost.median = a.at("cost_median").get<double>();
      row.cost.max = a.at("cost_max").get<std::uint64_t>();
      row.items = a.at("items").get<std::size_t>();
      row.budgets = a.at("budgets").get<std::vector<double>>();
      for (const auto& p : a.at("curve")) row.curve.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      r.rows.push_back(std::move(row));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
  return r;
}

inline const char* kReportCsvHeader =
    "representation,setting,clean_accuracy,seed,target_seed,attack,fooling_rate,robustness,auc,cost_mean,cost_median,"
    "cost_max,items";

/// One row per attack. Budget curves are written separately (write_curves_csv).
inline void write_report_csv(std::ostream& out, const RobustnessReport& r, bool header = true) {
  if (header) out << kReportCsvHeader << '\n';
  char buf[512];
  for (const auto& a : r.rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%llu,%llu,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%llu,%zu\n",
                  r.representation.c_str(), r.setting.c_str(), r.clean_accuracy,
                  static_cast<unsigned long long>(r.seed), static_cast<unsigned long long>(r.target_seed),
                  a.attack.c_str(), a.fooling_rate, a.robustness, a.auc, a.cost.mean, a.cost.median,
                  static_cast<unsigned long long>(a.cost.max), a.items);
    out << buf;
  }
}

inline void write_curves_csv(std::ostream& out, const RobustnessReport& r) {
  out << "attack,budget,normalized_budget,fooling_rate\n";
  char buf[256];
  for (const auto& a : r.rows)
    for (std::size_t i = 0; i < a.curve.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g\n", a.attack.c_str(), a.budgets[i], a.curve[i].budget,
                    a.curve[i].rate);
      out << buf;
    }
}

struct ReportCsvRow {
  std::string representation, setting, attack;
  double clean_accuracy = 0.0, fooling_rate = 0.0, robustness = 0.0, auc = 0.0;
  std::uint64_t seed = 0, target_seed = 0;
  CostStats cost;
  std::size_t items = 0;
};

inline std::vector<ReportCsvRow> parse_report_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kReportCsvHeader) throw FormatError("report csv: unexpected header");
  std::vector<ReportCsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 13) throw FormatError("report csv: expected 13 fields");
    try {
      ReportCsvRow r;
      r.representation = f[0];
      r.setting = f[1];
      r.clean_accuracy = std::stod(f[2]);
      r.seed = std::stoull(f[3]);
      r.target_seed = std::stoull(f[4]);
      r.attack = f[5];
      r.fooling_rate = std::stod(f[6]);
      r.robustness = std::stod(f[7]);
      r.auc = std::stod(f[8]);
      r.cost.mean = std::stod(f[9]);
      r.cost.median = std::stod(f[10]);
      r.cost.max = std::stoull(f[11]);
      r.items = std::stoull(f[12]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw FormatError("report csv: malformed number in line: " + line);
    }
  }
  return rows;
}

}  // namespace advspec
