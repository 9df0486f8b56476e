// advspec command-line driver: prepare, train, attack, transfer, report, sweep.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "advspec/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::vector<std::string> checkpoints;
  std::string run_dir;
  std::string grid;
  bool quiet = false;
};

nlohmann::json config_json(const Options& o) {
  if (o.config.empty()) throw advspec::ConfigError("--config is required");
  auto j = advspec::read_config_json(o.config);
  if (!j.is_object()) throw advspec::ConfigError("config must be a JSON object");
  if (!o.out.empty()) j["output"] = o.out;
  if (o.seed) j["seed"] = *o.seed;
  if (o.workers) j["workers"] = *o.workers;
  return j;
}

advspec::ExperimentConfig load(const Options& o) { return advspec::parse_config(config_json(o)); }

int run(const std::string& cmd, const Options& o) {
  std::ostream& log = o.quiet ? advspec::detail::null_stream() : std::cerr;
  if (cmd == "prepare") {
    const auto s = advspec::cmd_prepare(load(o), log);
    std::cout << "entries " << s.entries << " computed " << s.computed << " reused " << s.reused << "\n";
  } else if (cmd == "train") {
    const auto r = advspec::cmd_train(load(o), log).report;
    for (std::size_t f = 0; f < r.fold_accuracy.size(); ++f)
      std::cout << "fold " << f + 1 << " val_acc " << r.fold_accuracy[f] << "\n";
    std::cout << "test_acc " << r.test_accuracy << "\n";
  } else if (cmd == "attack") {
    const auto cfg = load(o);
    if (o.checkpoints.size() > 1) throw advspec::ConfigError("attack takes at most one --checkpoint");
    const auto ck = o.checkpoints.empty() ? advspec::default_checkpoint(cfg) : std::filesystem::path(o.checkpoints[0]);
    const auto r = advspec::cmd_attack(cfg, ck, log).report;
    for (const auto& row : r.rows)
      std::cout << row.attack << " auc " << row.auc << " fooling_rate " << row.fooling_rate << " cost_mean "
                << row.cost.mean << "\n";
  } else if (cmd == "transfer") {
    std::vector<std::filesystem::path> cks(o.checkpoints.begin(), o.checkpoints.end());
    const auto t = advspec::cmd_transfer(load(o), cks, log);
    advspec::write_transfer_csv(std::cout, t.matrix);
  } else if (cmd == "report") {
    std::filesystem::path dir = o.run_dir;
    if (dir.empty()) dir = o.out.empty() ? load(o).output : std::filesystem::path(o.out);
    const auto s = advspec::cmd_report(dir, log);
    advspec::write_summary_table(std::cout, s.reports);
  } else if (cmd == "sweep") {
    if (o.grid.empty()) throw advspec::ConfigError("sweep needs --grid");
    const auto s = advspec::sweep(config_json(o), advspec::parse_sweep_grid(advspec::read_config_json(o.grid)), log);
    advspec::write_summary_table(std::cout, s.reports);
    if (s.reports.empty()) throw advspec::DataError("sweep: every cell failed");
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial robustness of audio spectrogram classifiers"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", o.config, "experiment config (JSON)");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory (overrides the config)");
    sub->add_option("--seed", o.seed, "global seed (overrides the config)");
    sub->add_option("--workers", o.workers, "worker threads for attacks")->check(CLI::PositiveNumber);
    sub->add_flag("--quiet,-q", o.quiet, "suppress progress output");
  };
  auto* prepare = app.add_subcommand("prepare", "render the spectrogram cache");
  common(prepare, true);
  auto* train = app.add_subcommand("train", "train a model from the cache");
  common(train, true);
  auto* attack = app.add_subcommand("attack", "run the attack suite against a checkpoint");
  common(attack, true);
  attack->add_option("--checkpoint", o.checkpoints, "checkpoint (default <out>/model.advm)");
  auto* transfer = app.add_subcommand("transfer", "transferability matrix between checkpoints");
  common(transfer, true);
  transfer->add_option("--checkpoint", o.checkpoints, "checkpoint; repeat for each model (default: train new ones)");
  auto* report = app.add_subcommand("report", "merge reports below a run directory");
  common(report, false);
  report->add_option("run_dir", o.run_dir, "run directory (default: --out or the config's output)");
  auto* sweep = app.add_subcommand("sweep", "prepare, train and attack every cell of a setting grid");
  common(sweep, true);
  sweep->add_option("--grid", o.grid, "grid file (JSON)")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    return run(cmd, o);
  } catch (const advspec::ConfigError& e) {
    std::cerr << "advspec " << cmd << ": config error: " << e.what() << "\n";
    return kUsage;
  } catch (const advspec::Error& e) {
    std::cerr << "advspec " << cmd << ": " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "advspec " << cmd << ": internal error: " << e.what() << "\n";
    return kInternal;
  }
}
