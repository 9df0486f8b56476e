#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "advspec/checkpoint.hpp"
#include "advspec/model.hpp"
#include "advspec/oracle.hpp"
#include "advspec/train.hpp"
#include "support.hpp"

using namespace advspec;

TEST(Model, ParameterCountMatchesHandCount) {
  // stem 1*8*9+8, block0 2*(8*8*9+8), block1 8*16*9+16 + 16*16*9+16, projection 8*16+16, head 16*4+4
  const std::size_t expected = 80 + 2 * 584 + 1168 + 2320 + 144 + 68;
  EXPECT_EQ(init_model(ModelArch{}, 1).parameter_count(), expected);
  EXPECT_EQ(expected, 4948u);
}

TEST(Model, SameSeedSameParameters) {
  const auto a = init_model(ModelArch{}, 3), b = init_model(ModelArch{}, 3), c = init_model(ModelArch{}, 4);
  EXPECT_TRUE(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
  EXPECT_FALSE(std::equal(a.parameters().begin(), a.parameters().end(), c.parameters().begin()));
}

TEST(Model, ZeroModelIsUniform) {
  ModelArch arch;
  arch.input_height = arch.input_width = 16;
  const auto m = init_model(arch, 1, InitMode::Zero);
  std::vector<double> x(256, 17.0);
  const auto p = softmax(m.logits(x));
  for (double v : p) EXPECT_DOUBLE_EQ(v, 0.25);
  EXPECT_EQ(argmax(m.logits(x)), 0);
  GradientOracle o(m);
  EXPECT_NEAR(o.loss_and_input_grad(x, Objective::cross_entropy(2)).loss, std::log(4.0), 1e-15);
}

TEST(Model, SoftmaxShiftInvariant) {
  const std::vector<double> g{0.3, -1.2, 2.5}, h{100.3, 98.8, 102.5};
  const auto a = softmax(g), b = softmax(h);
  double sum = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(a[i], b[i], 1e-12);
    sum += a[i];
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_EQ(argmax(std::vector<double>{0, 0, 1, 0}), 2);
}

TEST(Model, GoldenLogits) {
  ModelArch a;
  a.input_height = a.input_width = 16;
  auto m = init_model(a, 42);
  m.set_input_normalization(100, 50);
  std::vector<double> x(256);
  for (int i = 0; i < 256; ++i) x[i] = (i * 37) % 256;
  const auto g = m.logits(x);
  const double want[] = {-1.1261685931917076, 0.091289267900465071, 0.32918246323814904, -0.18164906287721785};
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(g[k], want[k], 1e-12);
  EXPECT_EQ(argmax(g), 2);
}

TEST(Model, ShapeMismatchThrows) {
  const auto m = init_model(ModelArch{}, 1);
  EXPECT_THROW(m.logits(std::vector<double>(10)), ShapeError);
  ModelArch tiny;
  tiny.input_height = 0;
  EXPECT_THROW(MicroResNet{tiny}, ConfigError);
}

TEST(Model, GradientsMatchFiniteDifferences) {
  for (const auto& c : advspec::testing::gradient_check(11)) {
    EXPECT_GE(c.coordinates, 20) << c.layer;
    EXPECT_LT(c.max_relative_error, 1e-4) << c.layer;
  }
}

TEST(Oracle, CountsEveryGradientCall) {
  ModelArch a;
  a.input_height = a.input_width = 16;
  const auto m = init_model(a, 5);
  GradientOracle o(m);
  std::vector<double> x(256, 100.0), seed{1, 0, 0, 0};
  o.logits(x);
  o.predict(x);
  EXPECT_EQ(o.calls(), 0u);
  o.loss_and_input_grad(x, Objective::cross_entropy(1));
  o.loss_and_input_grad(x, Objective::cw_targeted(2, 0.0));
  o.logit_combination_grad(x, seed);
  EXPECT_EQ(o.calls(), 3u);
  EXPECT_THROW(o.loss_and_input_grad(x, Objective::cross_entropy(7)), std::invalid_argument);
  std::vector<double> outside(256, 300.0);
  EXPECT_THROW(o.loss_and_input_grad(outside, Objective::cross_entropy(0)), std::invalid_argument);
}

TEST(Oracle, CounterIsExactUnderConcurrency) {
  ModelArch a;
  a.input_height = a.input_width = 16;
  const auto m = init_model(a, 5);
  GradientOracle o(m);
  std::vector<std::thread> pool;
  for (int t = 0; t < 4; ++t)
    pool.emplace_back([&] {
      std::vector<double> x(256, 50.0);
      for (int i = 0; i < 25; ++i) o.loss_and_input_grad(x, Objective::cross_entropy(0));
    });
  for (auto& t : pool) t.join();
  EXPECT_EQ(o.calls(), 100u);
}

TEST(Oracle, CwMarginSign) {
  const std::vector<double> logits{1.0, 3.0, 2.0};
  EXPECT_DOUBLE_EQ(cw_margin(logits, Objective::cw_targeted(1, 0.0)), 0.0);  // already the target: clamped at -kappa
  EXPECT_DOUBLE_EQ(cw_margin(logits, Objective::cw_targeted(2, 0.0)), 1.0);
  EXPECT_DOUBLE_EQ(cw_margin(logits, Objective::cw_targeted(1, 0.5)), -0.5);
  EXPECT_DOUBLE_EQ(cw_margin(logits, Objective::cw_untargeted(1, 0.0)), 1.0);
}

TEST(Checkpoint, RoundTripIsExactAfterQuantization) {
  auto m = init_model(ModelArch{}, 9);
  m.set_input_normalization(101.5, 33.25);
  quantize_parameters(m);
  const auto bytes = encode_checkpoint(m, {{"note", "x"}});
  const auto ck = decode_checkpoint(bytes);
  EXPECT_TRUE(std::equal(m.parameters().begin(), m.parameters().end(), ck.model.parameters().begin()));
  EXPECT_EQ(ck.model.input_mean(), 101.5);
  EXPECT_EQ(ck.metadata.at("note"), "x");
  EXPECT_EQ(encode_checkpoint(ck.model, {{"note", "x"}}), bytes);
  EXPECT_THROW(decode_checkpoint(bytes + "!"), FormatError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  EXPECT_THROW(decode_checkpoint("NOPE"), FormatError);
}

namespace {

/// Two classes separated by the brightness of the top half of an 8x8 image.
std::vector<Sample> separable_set(int per_class, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Sample> data;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < per_class; ++i) {
      Sample s;
      s.label = c;
      s.group = static_cast<int>(data.size());
      s.pixels.resize(64);
      for (int p = 0; p < 64; ++p) s.pixels[p] = rng.uniform(0, 100) + ((p < 32) == (c == 0) ? 150.0 : 0.0);
      data.push_back(std::move(s));
    }
  return data;
}

ModelArch small_arch() {
  ModelArch a;
  a.input_height = a.input_width = 8;
  a.classes = 2;
  return a;
}

}  // namespace

TEST(Train, SplitSizesFollowArithmetic) {
  const auto data = separable_set(50, 1);
  TrainConfig cfg;
  const auto s = split_dataset(data, cfg, 2);
  EXPECT_EQ(s.dev.size(), 70u);
  EXPECT_EQ(s.test.size(), 30u);
  std::vector<int> per_fold(5, 0);
  for (int f : s.dev_fold) ++per_fold[f];
  for (int n : per_fold) EXPECT_EQ(n, 14);
}

TEST(Train, AugmentedSamplesStayInDev) {
  auto data = separable_set(10, 2);
  const std::size_t originals = data.size();
  for (std::size_t i = 0; i < originals; ++i) {
    auto copy = data[i];
    copy.augmented = true;
    data.push_back(copy);
  }
  const auto s = split_dataset(data, TrainConfig{}, 2);
  for (auto i : s.test) EXPECT_FALSE(data[i].augmented);
  std::set<int> test_groups;
  for (auto i : s.test) test_groups.insert(data[i].group);
  for (auto i : s.dev) EXPECT_FALSE(test_groups.count(data[i].group));
  EXPECT_EQ(s.dev.size() + s.test.size(), originals + originals - s.test.size());
}

TEST(Train, SeparableSetIsLearned) {
  const auto data = separable_set(40, 3);
  MicroResNet m(small_arch());
  TrainConfig cfg;
  cfg.seed = 4;
  const auto rep = train(m, data, cfg, 5);
  EXPECT_GE(rep.test_accuracy, 0.95);
  EXPECT_EQ(rep.fold_accuracy.size(), 5u);
}

TEST(Train, PatienceZeroRunsOneEpoch) {
  const auto data = separable_set(10, 3);
  MicroResNet m(small_arch());
  TrainConfig cfg;
  cfg.patience = 0;
  const auto rep = train(m, data, cfg, 1);
  for (const auto& e : rep.log) EXPECT_EQ(e.epoch, 1);
  EXPECT_EQ(rep.log.size(), 5u);
}

TEST(Train, Deterministic) {
  const auto data = separable_set(15, 3);
  MicroResNet a(small_arch()), b(small_arch());
  TrainConfig cfg;
  cfg.epochs_max = 3;
  train(a, data, cfg, 8);
  train(b, data, cfg, 8);
  EXPECT_TRUE(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
}

TEST(Train, MissingClassIsAConfigError) {
  auto data = separable_set(5, 3);
  data.resize(5);  // class 1 removed
  MicroResNet m(small_arch());
  EXPECT_THROW(train(m, data, TrainConfig{}, 1), ConfigError);
  TrainConfig bad;
  bad.folds = 1;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.train_fraction = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Train, FullBatchLossIsMonotoneAtSmallRate) {
  const auto data = separable_set(10, 6);
  auto m = init_model(small_arch(), 2);
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto [mean, sd] = pixel_moments(data, all);
  m.set_input_normalization(mean, sd);
  std::vector<double> grad(m.parameter_count());
  double prev = INFINITY;
  for (int step = 0; step < 10; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (const auto& s : data) loss += m.loss_and_param_grad(s.pixels, s.label, grad);
    EXPECT_LE(loss, prev);
    prev = loss;
    auto p = m.parameters();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= 1e-3 * grad[i] / data.size();
  }
}

TEST(Train, LogCsvLayout) {
  std::ostringstream out;
  write_train_log(out, {{0, 1, 0.5, 0.75}});
  EXPECT_EQ(out.str(), "epoch,fold,train_loss,val_acc\n1,1,0.5,0.750000\n");
}
