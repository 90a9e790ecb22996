// Command-line driver: ingest -> train -> backtest -> report.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cryptoens/config.hpp"
#include "cryptoens/errors.hpp"
#include "cryptoens/log.hpp"
#include "cryptoens/pipeline.hpp"
#include "cryptoens/report.hpp"
#include "cryptoens/synthetic.hpp"

namespace {

enum ExitCode : int {
  kOk = 0,
  kUnexpected = 1,
  kConfigError = 2,
  kDataError = 3,
  kModelError = 4,
  kBusy = 5,
};

}  // namespace

int main(int argc, char** argv) {
  using namespace cryptoens;

  CLI::App app{"Ensemble DRL portfolio trainer and granular backtester"};
  app.require_subcommand(1);
  std::optional<std::string> config_file;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_file, "JSON run configuration");
  app.add_option("-s,--set", overrides, "Override a config key, e.g. --set train.episodes=40")->take_all();

  auto* ingest = app.add_subcommand("ingest", "Load CSVs, align them and build the feature store");

  auto* train = app.add_subcommand("train", "Train windows and persist K+1 snapshots per window");
  std::optional<std::size_t> window;
  train->add_option("--window", window, "Train only this window (0-based retrain cycle)");

  auto* backtest = app.add_subcommand("backtest", "Run every strategy over all weekly periods");
  bool train_missing = false, greedy = false;
  backtest->add_flag("--train-missing", train_missing, "Train windows that have no snapshots yet");
  backtest->add_flag("--greedy", greedy, "Deterministic mean actions instead of sampling (diagnostic)");

  auto* report = app.add_subcommand("report", "Print summary tables and render SVG plots");
  std::optional<std::string> report_dir;
  report->add_option("--dir", report_dir, "Report directory (default <output_dir>/report)");

  auto* synth = app.add_subcommand("synth", "Write synthetic hourly CSVs for the default asset set");
  std::string synth_out = "data", synth_begin = "2018-01-01", synth_end = "2022-07-01";
  std::uint64_t synth_seed = 0;
  std::optional<std::string> trend_asset;
  double trend = 0.002, trend_noise = 0.001, flat_noise = 0.0005;
  bool flat = false;
  synth->add_option("--out", synth_out, "Output directory")->capture_default_str();
  synth->add_option("--begin", synth_begin, "First bar (ISO date or Unix seconds)")->capture_default_str();
  synth->add_option("--end", synth_end, "End (exclusive)")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Random seed")->capture_default_str();
  synth->add_option("--trend-asset", trend_asset, "Give this asset a deterministic hourly up-trend");
  synth->add_option("--trend", trend, "Hourly log-drift of the trend asset")->capture_default_str();
  synth->add_option("--trend-noise", trend_noise, "Hourly volatility of the trend asset")->capture_default_str();
  synth->add_flag("--flat", flat, "Make every other asset driftless with small noise");
  synth->add_option("--flat-noise", flat_noise, "Hourly volatility of flat assets")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (synth->parsed()) {
      auto spec = synth::default_spec(parse_timestamp(synth_begin), parse_timestamp(synth_end), synth_seed);
      if (trend_asset) {
        bool found = false;
        for (auto& a : spec.assets) {
          if (a.id == *trend_asset) {
            a.drift = trend;
            a.volatility = trend_noise;
            found = true;
          } else if (flat) {
            a.drift = 0.0;
            a.volatility = flat_noise;
          }
        }
        if (!found) throw ConfigError("unknown trend asset " + *trend_asset);
      }
      synth::write_csvs(synth::generate(spec), synth_out);
      log::info("wrote " + std::to_string(spec.assets.size()) + " CSV files to " + synth_out);
      return kOk;
    }

    const auto cfg = load_config(config_file ? std::optional<std::filesystem::path>(*config_file) : std::nullopt,
                                 overrides);
    if (report->parsed()) {
      const std::filesystem::path dir = report_dir ? std::filesystem::path(*report_dir) : pipeline::report_dir(cfg);
      pipeline::DirectoryLock lock(dir);
      report::render_report(dir, std::cout);
      return kOk;
    }

    pipeline::DirectoryLock lock(cfg.output_dir);
    log::debug("config hash " + cfg.hash);
    if (ingest->parsed()) {
      const auto r = pipeline::cmd_ingest(cfg);
      std::cout << "manifest " << r.manifest.string() << " hash " << r.manifest_hash << " rows " << r.rows
                << " columns " << r.columns << "\n";
    } else if (train->parsed()) {
      const auto results = pipeline::cmd_train(cfg, window);
      for (const auto& r : results)
        std::cout << "window " << r.snapshots.window << ": " << r.snapshots.entries.size() << " snapshots\n";
    } else if (backtest->parsed()) {
      const auto rep = pipeline::cmd_backtest(cfg, train_missing, greedy);
      std::cout << "report written to " << pipeline::report_dir(cfg).string() << " (" << rep.periods.size()
                << " period results)\n";
    }
    return kOk;
  } catch (const ConfigError& e) {
    log::error(std::string("config error: ") + e.what());
    return kConfigError;
  } catch (const DataError& e) {
    log::error(std::string("data error: ") + e.what());
    return kDataError;
  } catch (const ModelError& e) {
    log::error(std::string("model error: ") + e.what());
    return kModelError;
  } catch (const pipeline::LockError& e) {
    log::error(e.what());
    return kBusy;
  } catch (const std::exception& e) {
    log::error(std::string("unexpected error: ") + e.what());
    return kUnexpected;
  }
}
