// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cryptoens/agent.hpp"
#include "cryptoens/backtester.hpp"
#include "cryptoens/config.hpp"
#include "cryptoens/indicators.hpp"
#include "cryptoens/log.hpp"
#include "cryptoens/model_selection.hpp"
#include "cryptoens/pipeline.hpp"
#include "cryptoens/policy.hpp"
#include "cryptoens/ppo.hpp"
#include "cryptoens/synthetic.hpp"
#include "cryptoens/trading_env.hpp"
#include "oracles/indicator_oracles.hpp"
#include "oracles/metric_oracles.hpp"
#include "oracles/numeric_oracles.hpp"
#include "oracles/rl_oracles.hpp"
#include "support.hpp"

using namespace cryptoens;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(3);
  os << x;
  return os.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Largest |got - want| / max(1, |want|) over positions where the oracle is defined; NaN
/// placement must agree exactly.
double indicator_error(const std::vector<double>& got, const std::vector<double>& want) {
  if (got.size() != want.size()) return std::numeric_limits<double>::infinity();
  double worst = 0;
  for (std::size_t t = 0; t < got.size(); ++t) {
    if (std::isnan(want[t]) != std::isnan(got[t])) return std::numeric_limits<double>::infinity();
    if (!std::isnan(want[t])) worst = std::max(worst, std::abs(got[t] - want[t]) / std::max(1.0, std::abs(want[t])));
  }
  return worst;
}

Outcome indicator_oracles() {
  namespace ind = cryptoens::indicators;
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = testing_support::random_series(200, 1000 + seed);
    const auto h = s.highs(), l = s.lows(), c = s.closes();
    worst = std::max(worst, indicator_error(ind::sma(c, 30), oracle::sma(c, 30)));
    worst = std::max(worst, indicator_error(ind::sma(c, 60), oracle::sma(c, 60)));
    worst = std::max(worst, indicator_error(ind::rsi(c, 14), oracle::rsi(c, 14)));
    worst = std::max(worst, indicator_error(ind::cci(h, l, c, 20), oracle::cci(h, l, c, 20)));
    worst = std::max(worst, indicator_error(ind::macd(c), oracle::macd(c, 12, 26)));
    worst = std::max(worst, indicator_error(ind::atr(h, l, c, 14), oracle::atr(h, l, c, 14)));
    worst = std::max(worst, indicator_error(ind::adx(h, l, c, 14), oracle::adx(h, l, c, 14)));
  }
  std::size_t out_of_range = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng(seed);
    const double vol = 0.001 + 0.1 * rng.uniform();
    const auto s = testing_support::random_series(200 + rng.index(300), 5000 + seed, 1.0 + 1000 * rng.uniform(), vol);
    for (const auto& series : {ind::rsi(s.closes(), 14), ind::adx(s.highs(), s.lows(), s.closes(), 14)})
      for (double v : series)
        if (!std::isnan(v) && !(v >= 0.0 && v <= 100.0)) ++out_of_range;
  }
  return {worst <= 1e-6 && out_of_range == 0,
          "max oracle error " + fmt(worst) + " (tol 1e-6); RSI/ADX values outside [0,100] on 1000 fuzzed series: " +
              std::to_string(out_of_range)};
}

std::vector<double> density_cuts(double mu, double sigma, double hmax) {
  std::vector<double> cuts;
  for (int k = -10; k <= 10; ++k) cuts.push_back(hmax * std::tanh(mu + k * sigma));
  return cuts;
}

Outcome density() {
  using namespace policy;
  Rng rng(2);
  double worst_single = 0, worst_mix = 0, worst_identical = 0;
  for (int i = 0; i < 20; ++i) {
    const double mu = 2 * rng.uniform() - 1, sigma = kSigmaFloor + rng.uniform(), hmax = std::exp(9 * rng.uniform());
    const ActionDistribution d = TanhGaussian({mu}, {sigma}, {hmax});
    const double mass = oracle::integrate([&](double a) { return std::exp(log_prob(d, std::vector<double>{a})); },
                                          -hmax, hmax, density_cuts(mu, sigma, hmax));
    worst_single = std::max(worst_single, std::abs(mass - 1));
  }
  for (std::size_t K : {1, 2, 5}) {
    for (int rep = 0; rep < 4; ++rep) {
      const double hmax = 1 + 100 * rng.uniform();
      std::vector<ActionDistribution> comps;
      std::vector<double> cuts;
      for (std::size_t k = 0; k < K; ++k) {
        const double mu = 2 * rng.uniform() - 1, sigma = 0.05 + rng.uniform();
        comps.push_back(TanhGaussian({mu}, {sigma}, {hmax}));
        const auto c = density_cuts(mu, sigma, hmax);
        cuts.insert(cuts.end(), c.begin(), c.end());
      }
      const MixturePolicy m(comps);
      const double mass =
          oracle::integrate([&](double a) { return std::exp(m.log_prob(std::vector<double>{a})); }, -hmax, hmax, cuts);
      worst_mix = std::max(worst_mix, std::abs(mass - 1));

      const MixturePolicy same(std::vector<ActionDistribution>(K, comps[0]));
      for (int t = 0; t < 100; ++t) {
        const std::vector<double> a = {hmax * (2 * rng.uniform() - 1) * 0.999};
        worst_identical = std::max(worst_identical, std::abs(same.log_prob(a) - log_prob(comps[0], a)));
      }
    }
  }
  return {worst_single <= 1e-6 && worst_mix <= 1e-6 && worst_identical <= 1e-12,
          "|mass - 1| single " + fmt(worst_single) + ", mixture K in {1,2,5} " + fmt(worst_mix) +
              " (tol 1e-6); identical components vs single " + fmt(worst_identical) + " (tol 1e-12)"};
}

nn::NetShape grad_shape(bool cov) {
  nn::NetShape s;
  s.input_dim = 5;
  s.seq_len = 3;
  s.fc_units = 3;
  s.hidden = 4;
  s.actions = 2;
  s.cov_head = cov;
  return s;
}

double max_rel_error(const std::vector<double>& grad, const std::vector<double>& fd) {
  double worst = 0;
  for (std::size_t i = 0; i < fd.size(); ++i) worst = std::max(worst, oracle::rel_error(grad[i], fd[i], 1e-5));
  return worst;
}

Outcome gradients() {
  double net_worst = 0, loss_worst = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (bool cov : {false, true}) {
      const auto shape = grad_shape(cov);
      Rng rng(seed);
      auto w = nn::xavier_init(shape, seed);
      for (double& p : w.params) p += 0.3 * rng.normal();
      const std::size_t B = 4;
      std::vector<double> x(B * shape.seq_len * shape.input_dim);
      for (double& v : x) v = rng.normal();

      // Network alone: a random linear functional of every head output.
      nn::HeadGradients probe;
      auto fill = [&](std::vector<double>& v, std::size_t n) {
        v.resize(n);
        for (double& e : v) e = rng.normal();
      };
      fill(probe.mu, B * 2);
      fill(probe.sigma, B * 2);
      fill(probe.value, B);
      fill(probe.cov, B * shape.cov_dim());
      auto probe_loss = [&](const nn::ForwardOutput& o) {
        double s = 0;
        for (std::size_t i = 0; i < o.mu.size(); ++i) s += probe.mu[i] * o.mu[i] + probe.sigma[i] * o.sigma[i];
        for (std::size_t i = 0; i < o.value.size(); ++i) s += probe.value[i] * o.value[i];
        for (std::size_t i = 0; i < o.cov.size(); ++i) s += probe.cov[i] * o.cov[i];
        return s;
      };
      nn::ForwardTrace tr;
      nn::forward(w, x, B, nn::Mode::Train, Exec::Serial, &tr);
      const auto g = nn::backward(w, tr, probe, Exec::Serial);
      const auto fd = oracle::central_difference(
          [&](std::span<const double> p) {
            nn::NetworkWeights v = w;
            v.params.assign(p.begin(), p.end());
            return probe_loss(nn::forward(v, x, B, nn::Mode::Train, Exec::Serial));
          },
          w.params, 1e-5);
      net_worst = std::max(net_worst, max_rel_error(g, fd));

      // Through ppo_loss, with actions drawn from the network's own policy.
      const auto out = nn::forward(w, x, B, nn::Mode::Train, Exec::Serial);
      ppo::LossBatch batch;
      batch.size = B;
      batch.action_dim = 2;
      for (std::size_t i = 0; i < B; ++i) {
        const std::vector<double> hmax = {70.0, 5.0 + 20 * rng.uniform()};
        const auto dist = agent::distribution(out, i, hmax);
        const auto a = policy::sample(dist, rng);
        batch.actions.insert(batch.actions.end(), a.begin(), a.end());
        batch.hmax.insert(batch.hmax.end(), hmax.begin(), hmax.end());
        batch.log_prob_old.push_back(policy::log_prob(dist, a) + 0.05 * rng.normal());
        batch.advantages.push_back(rng.normal());
        batch.returns.push_back(rng.normal());
      }
      ppo::TrainConfig cfg;
      cfg.c1 = 1.0;
      nn::ForwardTrace tr2;
      const auto out2 = nn::forward(w, x, B, nn::Mode::Train, Exec::Serial, &tr2);
      const auto g2 = nn::backward(w, tr2, ppo::ppo_loss(batch, out2, cfg).grads, Exec::Serial);
      const auto fd2 = oracle::central_difference(
          [&](std::span<const double> p) {
            nn::NetworkWeights v = w;
            v.params.assign(p.begin(), p.end());
            return ppo::ppo_loss(batch, nn::forward(v, x, B, nn::Mode::Train, Exec::Serial), cfg).diag.loss;
          },
          w.params, 1e-5);
      loss_worst = std::max(loss_worst, max_rel_error(g2, fd2));
    }
  }
  return {net_worst < 1e-3 && loss_worst < 1e-3,
          "max relative error network " + fmt(net_worst) + ", through ppo_loss " + fmt(loss_worst) +
              " (tol 1e-3; hidden 4, D=2, 10 seeds, with and without covariance head)"};
}

Outcome gae() {
  Rng rng(4);
  double worst = 0;
  bool td_exact = true;
  for (int ep = 0; ep < 100; ++ep) {
    const std::size_t n = 1 + rng.index(200);
    std::vector<double> r(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = rng.normal();
      v[i] = 3 * rng.normal();
    }
    const double gamma = 0.5 + 0.5 * rng.uniform(), lambda = rng.uniform(), boot = rng.normal();
    const auto got = ppo::compute_gae(r, v, boot, gamma, lambda);
    const auto want = oracle::gae_double_sum(r, v, boot, gamma, lambda);
    for (std::size_t t = 0; t < n; ++t) worst = std::max(worst, std::abs(got.advantages[t] - want[t]));
    const auto td = ppo::compute_gae(r, v, boot, gamma, 0.0);
    for (std::size_t t = 0; t < n; ++t)
      td_exact = td_exact && td.advantages[t] == r[t] + gamma * (t + 1 < n ? v[t + 1] : boot) - v[t];
  }
  return {worst <= 1e-10 && td_exact, "max |recursion - double sum| " + fmt(worst) +
                                          " (tol 1e-10) on 100 episodes; lambda=0 equals TD residuals exactly: " +
                                          (td_exact ? "yes" : "no")};
}

Outcome accounting() {
  const auto fm = testing_support::random_matrix(600, 5, 5);
  env::TradingEnv env(fm);
  Rng rng(5);
  std::size_t negative = 0, mismatched = 0;
  for (int ep = 0; ep < 1000; ++ep) {
    const std::size_t begin = 11 + rng.index(450);
    const std::size_t len = 1 + rng.index(120);
    env.reset({begin, begin + len});
    const double v0 = env.portfolio_value();
    double v = v0;
    std::vector<double> rewards, a(5);
    while (!env.done()) {
      for (std::size_t d = 0; d < 5; ++d) a[d] = env.hmax()[d] * 3.0 * (2 * rng.uniform() - 1);
      const auto r = env.step(a);
      rewards.push_back(r.reward);
      v = r.value;
      for (double h : env.state().account.holdings) negative += h < 0.0;
      negative += env.state().account.balance < 0.0;
    }
    mismatched += oracle::exact_sum(rewards) != v - v0;
  }
  return {negative == 0 && mismatched == 0,
          "1000 episodes: negative holdings/balance observations " + std::to_string(negative) +
              ", episodes where the exactly rounded sum of rewards differs from V_final - V_initial " +
              std::to_string(mismatched)};
}

RunConfig config_in(const fs::path& root, std::vector<std::string> overrides) {
  overrides.push_back("data.dir=" + (root / "data").string());
  overrides.push_back("output_dir=" + (root / "out").string());
  return load_config(std::nullopt, overrides);
}

struct FourYearData {
  testing_support::TempDir dir{"acceptance_4y"};
  RunConfig cfg;
  pipeline::FeatureStore store;
  backtest::Schedule schedule;
};

FourYearData& four_year_data() {
  static FourYearData d = [] {
    FourYearData x;
    synth::write_csvs(synth::generate(synth::default_spec(date_to_epoch(2018, 1, 1), date_to_epoch(2022, 7, 1), 6)),
                      x.dir.path() / "data");
    x.cfg = config_in(x.dir.path(), {"train.episodes=2", "train.workers=2", "train.update_epochs=1"});
    pipeline::cmd_ingest(x.cfg);
    x.store = pipeline::open_feature_store(x.cfg);
    x.schedule = pipeline::schedule_for(x.cfg, x.store);
    return x;
  }();
  return d;
}

Outcome protocol_shape() {
  auto& d = four_year_data();
  const auto& cfg = d.cfg;
  const std::size_t cycles = d.schedule.cycles.size(), weeks = d.schedule.weeks.size();

  const auto wd = pipeline::window_data(cfg, d.store, d.schedule.cycles[0]);
  env::TradingEnv env(wd.features, cfg.env);
  const auto& s = env.reset(wd.train_range);
  const bool state_ok = env.assets() == 5 && env.obs_dim() == 66 && s.window.size() == 12 * 66 &&
                        cfg.net.input_dim == 66 && cfg.net.seq_len == 12;

  const auto trained = pipeline::train_window(cfg, d.store, d.schedule, 0);
  const auto loaded = selection::load_snapshot_set(pipeline::snapshot_dir(cfg, 0));
  std::size_t files = 0;
  for (const auto& f : fs::directory_iterator(pipeline::snapshot_dir(cfg, 0))) files += f.path().extension() == ".snap";

  const std::size_t K = loaded.best.size();
  return {cycles == 48 && weeks == 208 && state_ok && cfg.K == 9 && K == 9 && trained.snapshots.entries.size() == 10 &&
              files == 10,
          std::to_string(cycles) + " retrain cycles (want 48), " + std::to_string(weeks) +
              " weekly periods (want 208), state " + std::to_string(cfg.env.window) + "x" +
              std::to_string(env.obs_dim()) + " with D=" + std::to_string(env.assets()) + ", ensemble size " +
              std::to_string(K) + " (want 9), snapshots per window " + std::to_string(files) + " (want K+1 = 10)"};
}

Outcome learning_sanity() {
  std::vector<std::string> lines;
  bool all = true;
  for (std::uint64_t seed : {1, 2, 3}) {
    testing_support::TempDir dir("acceptance_learn_" + std::to_string(seed));
    auto spec = synth::default_spec(date_to_epoch(2018, 1, 1), date_to_epoch(2018, 4, 2), seed);
    const std::string trend_asset = spec.assets[0].id;
    for (auto& a : spec.assets) {
      a.drift = a.id == trend_asset ? std::log(1.002) : 0.0;
      a.volatility = a.id == trend_asset ? 0.001 : 0.0005;
    }
    synth::write_csvs(synth::generate(spec), dir.path() / "data");
    const auto cfg = config_in(dir.path(), {"schedule.test_begin=\"2018-03-01\"", "schedule.test_end=\"2018-04-01\"",
                                            "schedule.train_months=1", "train.episodes=30", "train.workers=2",
                                            "train.batch_size=1024", "train.learning_rate=0.0003",
                                            "selection.K=3", "seed=" + std::to_string(seed)});
    pipeline::cmd_ingest(cfg);
    const auto rep = pipeline::cmd_backtest(cfg, true, false);

    const auto store = pipeline::open_feature_store(cfg);
    const auto schedule = pipeline::schedule_for(cfg, store);
    double flat_bh = 0;
    for (const auto& w : schedule.weeks) {
      const auto range = backtest::episode_for(store.raw, w.start, w.end);
      double r = 0;
      for (std::size_t d = 1; d < store.raw.assets(); ++d)
        r += store.raw.close_row(range.end)[d] / store.raw.close_row(range.begin)[d] - 1;
      flat_bh += r / static_cast<double>(store.raw.assets() - 1);
    }
    flat_bh /= static_cast<double>(schedule.weeks.size());
    double ensemble = 0;
    for (const auto& s : rep.summaries)
      if (s.strategy == "ensemble")
        ensemble = std::accumulate(s.weekly_returns.begin(), s.weekly_returns.end(), 0.0) /
                   static_cast<double>(s.weekly_returns.size());
    const bool ok = ensemble > 0 && ensemble > flat_bh;
    all = all && ok;
    lines.push_back("seed " + std::to_string(seed) + ": ensemble " + fmt(ensemble) + " vs flat B&H " + fmt(flat_bh));
  }
  std::string detail = "mean weekly return, ";
  for (std::size_t i = 0; i < lines.size(); ++i) detail += (i ? "; " : "") + lines[i];
  return {all, detail};
}

Outcome benchmark_exactness() {
  auto& d = four_year_data();
  const auto& fm = d.store.raw;
  double worst = 0;
  for (const auto& w : d.schedule.weeks) {
    const auto v = backtest::buy_and_hold_values(fm, backtest::episode_for(fm, w.start, w.end), 1e6);
    const auto first = fm.row_of(w.start - kHour), last = fm.row_of(w.end - kHour);
    double mean = 0;
    for (std::size_t a = 0; a < fm.assets(); ++a) mean += fm.close_row(last)[a] / fm.close_row(first)[a] - 1;
    mean /= static_cast<double>(fm.assets());
    worst = std::max(worst, std::abs((v.back() / v.front() - 1) - mean));
  }
  return {worst <= 1e-9, "max |B&H weekly return - mean asset return| " + fmt(worst) + " over " +
                             std::to_string(d.schedule.weeks.size()) + " synthetic weeks (tol 1e-9)"};
}

Outcome metric_oracles() {
  Rng rng(9);
  double worst = 0;
  for (int s = 0; s < 100; ++s) {
    std::vector<double> v = {1e6};
    for (int t = 0; t < 500; ++t) v.push_back(v.back() * std::exp(0.01 * rng.normal() + 2e-4 * rng.normal()));
    const auto m = backtest::compute_metrics(v);
    const auto o = oracle::risk_stats(v);
    for (auto [got, want] : {std::pair{*m.sharpe, o.sharpe}, std::pair{*m.sortino, o.sortino},
                             std::pair{m.volatility, o.volatility}, std::pair{m.max_drawdown, o.max_drawdown}})
      worst = std::max(worst, std::abs(got - want) / std::max(1.0, std::abs(want)));
  }

  // Quantile table and monthly compounding on a synthetic report.
  backtest::Schedule sched = backtest::build_schedule(date_to_epoch(2018, 1, 1), date_to_epoch(2018, 7, 1),
                                                      date_to_epoch(2019, 7, 1), 6);
  std::vector<backtest::PeriodResult> results;
  for (const auto& w : sched.weeks) {
    backtest::PeriodResult r;
    r.week = w.id;
    r.cycle = w.cycle;
    r.strategy = "ensemble";
    r.values = {1e6};
    for (std::size_t h = 0; h < w.hours(); ++h) r.values.push_back(r.values.back() * (1 + 0.003 * rng.normal()));
    r.weekly_return = r.values.back() / r.values.front() - 1;
    r.metrics = backtest::compute_metrics(r.values);
    results.push_back(std::move(r));
  }
  const auto rep = backtest::distributional_report(results, sched, 1e6);
  const auto& s = rep.summaries.at(0);
  bool monotone = true;
  for (std::size_t i = 1; i < s.quantiles.size(); ++i) monotone = monotone && s.quantiles[i] <= s.quantiles[i - 1];
  // Monthly return from the chained value path, independent of the weekly product.
  double compound_err = 0;
  std::size_t offset = 0;
  for (std::size_t c = 0; c < sched.cycles.size(); ++c) {
    std::size_t hours = 0;
    for (auto w : sched.cycles[c].weeks) hours += sched.weeks[w].hours();
    const double path = s.chained_values[offset + hours] / s.chained_values[offset] - 1;
    compound_err = std::max(compound_err, std::abs(path - s.monthly_returns[c]));
    offset += hours;
  }
  return {worst <= 1e-9 && monotone && compound_err <= 1e-12,
          "max relative error Sharpe/Sortino/volatility/MDD " + fmt(worst) + " (tol 1e-9) on 100 series; quantiles " +
              (monotone ? "monotone" : "NOT monotone") + "; monthly compounding error " + fmt(compound_err) +
              " (tol 1e-12)"};
}

int run_cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" CRYPTOENS_CLI "' " + args + " > cli.log 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  testing_support::TempDir root("acceptance_e2e");
  const std::string config = R"({
  "schedule": {"test_begin": "2018-03-01", "test_end": "2018-05-01", "train_months": 1},
  "network": {"hidden": 16, "fc_units": 8},
  "train": {"episodes": 8, "workers": 4, "batch_size": 512, "update_epochs": 2},
  "selection": {"K": 3},
  "seed": 2024
})";
  std::vector<std::string> reports;
  for (const char* run : {"run_a", "run_b"}) {
    const auto dir = root.path() / run;
    fs::create_directories(dir);
    std::ofstream(dir / "run.json") << config;
    for (const char* step : {"synth --out data --begin 2018-01-01 --end 2018-05-02 --seed 8", "-c run.json ingest",
                             "-c run.json train", "-c run.json backtest", "-c run.json report"}) {
      const int rc = run_cli(dir, step);
      if (rc != 0) return {false, std::string(run) + ": `" + step + "` exited with " + std::to_string(rc)};
    }
    reports.push_back(slurp(dir / "out" / "report" / "report.json"));
  }
  const bool same = !reports[0].empty() && reports[0] == reports[1];
  return {same, "two runs (ingest, train 2 windows, backtest, report) produced " +
                    std::string(same ? "byte-identical" : "DIFFERENT") + " report.json (" +
                    std::to_string(reports[0].size()) + " bytes)"};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;  // 0 = no runtime limit
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  log::set_threshold(log::Level::Warn);
  const std::vector<Criterion> criteria = {
      {1, "indicator oracles", 5, indicator_oracles},
      {2, "density correctness", 10, density},
      {3, "gradient suite", 30, gradients},
      {4, "GAE equivalence", 0, gae},
      {5, "environment accounting", 0, accounting},
      {6, "protocol shape", 0, protocol_shape},
      {7, "learning sanity", 600, learning_sanity},
      {8, "benchmark exactness", 0, benchmark_exactness},
      {9, "metric oracles", 0, metric_oracles},
      {10, "end-to-end determinism", 900, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.limit_s == 0 || secs < c.limit_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << c.id << ". " << c.name << ": " << o.detail << "; " << fmt(secs)
              << " s";
    if (c.limit_s > 0) std::cout << " (limit " << c.limit_s << " s)";
    std::cout << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
