#include <gtest/gtest.h>

#include <sstream>

#include "advspec/eval.hpp"
#include "support.hpp"

using namespace advspec;

namespace {

std::vector<AttackResult> outcomes(int successes, int total) {
  std::vector<AttackResult> v(total);
  for (int i = 0; i < successes; ++i) v[i].success = true;
  return v;
}

AttackResult adversarial(std::vector<double> x, int true_label, std::optional<int> target = std::nullopt) {
  AttackResult r;
  r.x_adv = std::move(x);
  r.true_label = true_label;
  r.target_label = target;
  r.success = true;
  return r;
}

RobustnessReport sample_report() {
  RobustnessReport r;
  r.representation = "mel";
  r.setting = "synthetic-8k";
  r.clean_accuracy = 0.975;
  r.seed = 7;
  r.target_seed = 123456789012345ull;
  std::vector<std::vector<AttackResult>> per_budget{outcomes(1, 4), outcomes(3, 4), outcomes(4, 4)};
  for (auto& batch : per_budget)
    for (std::size_t i = 0; i < batch.size(); ++i) batch[i].gradient_calls = i + 1;
  r.rows.push_back(make_attack_row("bim_a", std::vector<double>{0.1, 0.5, 1.0}, per_budget));
  r.rows.push_back(make_attack_row("fgsm", std::vector<double>{0.2, 0.4}, {outcomes(0, 3), outcomes(3, 3)}));
  return r;
}

}  // namespace

TEST(FoolingRate, Examples) {
  EXPECT_EQ(fooling_rate(outcomes(5, 5)).rate, 1.0);
  EXPECT_EQ(fooling_rate(outcomes(0, 5)).robustness, 1.0);
  EXPECT_DOUBLE_EQ(fooling_rate(outcomes(7, 10)).rate, 0.7);
  EXPECT_THROW(fooling_rate(std::vector<AttackResult>{}), DataError);
}

TEST(FoolingRate, RobustnessIsExactComplement) {
  for (int total = 1; total <= 60; ++total)
    for (int k = 0; k <= total; ++k) {
      const auto f = fooling_rate(outcomes(k, total));
      EXPECT_EQ(f.rate + f.robustness, 1.0);
    }
}

TEST(Auc, Examples) {
  EXPECT_DOUBLE_EQ(auc_over_budget({{0.2, 1.0}, {1.0, 1.0}}), 1.0);
  EXPECT_DOUBLE_EQ(auc_over_budget({{0.1, 0.3}, {0.6, 0.3}}), 0.3);
  EXPECT_DOUBLE_EQ(auc_over_budget({{0.0, 0.0}, {0.5, 0.5}, {1.0, 1.0}}), 0.5);
  // flat extension on both sides: 0.5*0.2 + 0.5*(0.2+0.6)*0.5 + 0.25*0.6
  EXPECT_DOUBLE_EQ(auc_over_budget({{0.25, 0.2}, {0.75, 0.6}}), 0.05 + 0.2 + 0.15);
}

TEST(Auc, Errors) {
  EXPECT_THROW(auc_over_budget({{0.5, 0.5}}), DataError);
  EXPECT_THROW(auc_over_budget({{0.5, 0.5}, {0.5, 0.6}}), DataError);
  EXPECT_THROW(auc_over_budget({{0.5, 0.5}, {0.4, 0.6}}), DataError);
  EXPECT_THROW(auc_over_budget({{0.5, 0.5}, {1.0, 1.2}}), DataError);
  EXPECT_THROW(normalize_budgets(std::vector<double>{}), ConfigError);
  EXPECT_THROW(normalize_budgets(std::vector<double>{0.0, 0.0}), ConfigError);
}

TEST(Auc, MonotoneCurveStaysBetweenExtremes) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(8));
    std::vector<double> b(n), r(n);
    for (auto& v : b) v = rng.uniform();
    for (auto& v : r) v = rng.uniform();
    std::sort(b.begin(), b.end());
    std::sort(r.begin(), r.end());
    BudgetCurve c;
    for (int i = 0; i < n; ++i)
      if (c.empty() || b[i] > c.back().budget) c.push_back({b[i], r[i]});
    if (c.size() < 2) continue;
    const double a = auc_over_budget(c);
    EXPECT_GE(a, c.front().rate - 1e-15);
    EXPECT_LE(a, c.back().rate + 1e-15);
  }
}

TEST(Cost, Examples) {
  const std::vector<std::uint64_t> mixed{5, 1, 3};
  const auto s = cost_stats(mixed);
  EXPECT_EQ(s.mean, 3.0);
  EXPECT_EQ(s.median, 3.0);
  EXPECT_EQ(s.max, 5u);
  EXPECT_EQ(cost_stats(std::vector<std::uint64_t>{1, 2, 3, 10}).median, 2.5);
  EXPECT_THROW(cost_stats(std::vector<std::uint64_t>{}), DataError);
}

TEST(Cost, FgsmBatchCostsOnePerItem) {
  ModelArch a;
  a.input_height = a.input_width = 8;
  const auto m = init_model(a, 4);
  Rng rng(5);
  std::vector<std::vector<double>> xs(9, std::vector<double>(64));
  std::vector<BatchItem> items;
  for (auto& x : xs) {
    for (double& v : x) v = rng.uniform(0.0, 255.0);
    items.push_back({x, 0});
  }
  AttackSpec spec;
  spec.fgsm.epsilon = 5.0;
  const auto out = run_attack_batch(m, items, spec, 1);
  EXPECT_EQ(out.total_calls, 9u);
  EXPECT_EQ(cost_stats(out.results).mean, 1.0);
  spec.kind = AttackKind::BimB;
  spec.bim.epsilon = 5.0;
  spec.bim.step = 1.0;
  EXPECT_EQ(cost_stats(run_attack_batch(m, items, spec, 1).results).mean, 10.0);
}

TEST(Transfer, RatioAndDiagonal) {
  // class 0 when x0 > x1
  LinearClassifier model(2, {1.0, 0.0, 0.0, 1.0}, {0.0, 0.0});
  LinearClassifier always_zero(2, {0.0, 0.0, 0.0, 0.0}, {1.0, 0.0});
  std::vector<AttackResult> src{adversarial({0.0, 1.0}, 0), adversarial({0.0, 2.0}, 0), adversarial({5.0, 1.0}, 1)};
  src.push_back(AttackResult{});  // unsuccessful, ignored
  EXPECT_EQ(transferability(src, model), 1.0);
  EXPECT_DOUBLE_EQ(transferability(src, always_zero), 1.0 / 3.0);
  EXPECT_THROW(transferability(std::vector<AttackResult>{AttackResult{}}, model), DataError);

  const std::vector<const Classifier*> models{&model, &always_zero};
  const auto m = transfer_matrix({"a", "b"}, models, {src, src});
  EXPECT_EQ(m.cells[0][0], 1.0);
  EXPECT_EQ(m.cells[1][1], 1.0);
  EXPECT_DOUBLE_EQ(m.cells[0][1], 1.0 / 3.0);
  EXPECT_NO_THROW(m.validate());
  std::ostringstream csv;
  write_transfer_csv(csv, m);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "source,a,b");
}

TEST(Transfer, PermutationBaselineIsSeeded) {
  LinearClassifier model(2, {1.0, 0.0, 0.0, 1.0}, {0.0, 0.0});
  std::vector<AttackResult> src;
  for (int i = 0; i < 20; ++i) src.push_back(adversarial({i % 2 ? 5.0 : 0.0, 1.0}, i % 3 ? 0 : 1));
  const double a = permutation_baseline(src, model, 11), b = permutation_baseline(src, model, 11);
  EXPECT_EQ(a, b);
  EXPECT_GE(a, 0.0);
  EXPECT_LE(a, 1.0);
}

TEST(Report, JsonRoundTrip) {
  const auto r = sample_report();
  EXPECT_EQ(r.rows[0].curve.size(), 3u);
  EXPECT_DOUBLE_EQ(r.rows[0].fooling_rate, (0.25 + 0.75 + 1.0) / 3.0);
  EXPECT_EQ(r.rows[0].cost.mean, 2.5);
  EXPECT_EQ(r.rows[0].cost.max, 4u);
  EXPECT_EQ(r.rows[0].items, 12u);
  const auto back = report_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(back, r);
  auto bad = to_json(r);
  bad["schema"] = 99;
  EXPECT_THROW(report_from_json(bad), FormatError);
  bad = to_json(r);
  bad.erase("attacks");
  EXPECT_THROW(report_from_json(bad), FormatError);
}

TEST(Report, CsvRoundTrip) {
  const auto r = sample_report();
  std::stringstream ss;
  write_report_csv(ss, r);
  const auto rows = parse_report_csv(ss);
  ASSERT_EQ(rows.size(), 2u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].attack, r.rows[i].attack);
    EXPECT_EQ(rows[i].auc, r.rows[i].auc);
    EXPECT_EQ(rows[i].fooling_rate, r.rows[i].fooling_rate);
    EXPECT_EQ(rows[i].cost, r.rows[i].cost);
    EXPECT_EQ(rows[i].target_seed, r.target_seed);
    EXPECT_EQ(rows[i].clean_accuracy, r.clean_accuracy);
  }
  std::istringstream bad("attack,auc\n");
  EXPECT_THROW(parse_report_csv(bad), FormatError);
}

TEST(Report, CurvesCsv) {
  std::ostringstream out;
  write_curves_csv(out, sample_report());
  std::istringstream in(out.str());
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  EXPECT_EQ(n, 1 + 3 + 2);
}
