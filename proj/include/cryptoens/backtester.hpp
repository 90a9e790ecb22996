#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cryptoens/exec.hpp"
#include "cryptoens/features.hpp"
#include "cryptoens/network.hpp"
#include "cryptoens/time_util.hpp"
#include "cryptoens/trading_env.hpp"

namespace cryptoens::backtest {

inline constexpr double kHoursPerYear = 8760.0;

struct WeekPeriod {
  std::size_t id = 0;     // 0-based, chronological
  std::size_t cycle = 0;  // retrain cycle containing `start`
  EpochSeconds start = 0;
  EpochSeconds end = 0;  // exclusive
  std::size_t hours() const { return static_cast<std::size_t>((end - start) / kHour); }
};

struct RetrainCycle {
  std::size_t id = 0;
  EpochSeconds train_begin = 0, train_end = 0;  // [begin, end)
  EpochSeconds test_begin = 0, test_end = 0;
  std::vector<std::size_t> weeks;
};

struct Schedule {
  std::vector<RetrainCycle> cycles;
  std::vector<WeekPeriod> weeks;
};

/// Calendar-month retrain cycles starting at `test_begin` (a month start) and 7-day test
/// periods on a grid from `test_begin`. A trailing partial week joins the last period.
/// Cycles that would contain no period start are dropped.
Schedule build_schedule(EpochSeconds data_begin, EpochSeconds test_begin, EpochSeconds test_end,
                        int train_months);

/// Hours [start, end) as an episode: trade at the closes of hours start-1 .. end-2 and mark
/// to market through the close of hour end-1.
env::EpisodeRange episode_for(const market::FeatureMatrix& fm, EpochSeconds start, EpochSeconds end);

// ---- metrics on an hourly value series ----

std::vector<double> hourly_returns(std::span<const double> values);
/// (V_end / V_start)^(8760 / hours) - 1
double annualized_return(std::span<const double> values, double hours);
/// mean / std * sqrt(8760); nullopt when the std is zero.
std::optional<double> sharpe(std::span<const double> values);
/// mean / downside deviation * sqrt(8760); +inf when there is no downside and the mean is
/// positive, nullopt when both are zero.
std::optional<double> sortino(std::span<const double> values);
double volatility(std::span<const double> values);
double max_drawdown(std::span<const double> values);

struct Metrics {
  double cumulative_return = 0.0;
  double annualized_return = 0.0;
  std::optional<double> sortino;
  std::optional<double> sharpe;
  double max_drawdown = 0.0;
  double volatility = 0.0;
};

Metrics compute_metrics(std::span<const double> values);

/// Row labels in display order.
const std::array<const char*, 6>& metric_names();
std::optional<double> metric_value(const Metrics& m, std::size_t index);

// ---- strategies ----

enum class StrategyKind { Ensemble, FinalEpoch, Individual, BuyAndHold };

struct Strategy {
  StrategyKind kind = StrategyKind::Ensemble;
  std::size_t index = 0;  // 1-based member index for Individual
  std::string name() const;
};

/// Equal USD allocation at the close of `range.begin`, held to `range.end`.
std::vector<double> buy_and_hold_values(const market::FeatureMatrix& fm, env::EpisodeRange range,
                                        double initial_balance);

struct PeriodResult {
  std::size_t week = 0;
  std::size_t cycle = 0;
  std::string strategy;
  std::vector<double> values;  // hourly portfolio values, starting at the initial balance
  double weekly_return = 0.0;
  Metrics metrics;
};

struct CycleModels {
  std::vector<std::shared_ptr<const nn::NetworkWeights>> best;  // K ensemble members
  std::shared_ptr<const nn::NetworkWeights> final_epoch;
};

struct BacktestOptions {
  env::EnvConfig env;
  std::uint64_t seed = 0;
  bool greedy = false;
  bool individuals = true;
  Exec exec = Exec::Parallel;
};

std::vector<Strategy> strategies_for(std::size_t K, bool individuals);

/// One strategy on one period. Model strategies act with the mixture of `models`.
PeriodResult run_strategy(const Strategy& strategy, std::span<const nn::NetworkWeights* const> models,
                          std::shared_ptr<const market::FeatureMatrix> features, const WeekPeriod& week,
                          const BacktestOptions& opt);

/// Every strategy on every period of one cycle; periods run in parallel and results come
/// back in (period, strategy) order.
std::vector<PeriodResult> run_cycle(std::shared_ptr<const market::FeatureMatrix> features,
                                    const Schedule& schedule, std::size_t cycle,
                                    const CycleModels& models, const BacktestOptions& opt);

// ---- reports ----

/// Quantile levels in display order (100% down to 0%).
const std::array<double, 11>& quantile_levels();
/// Linear interpolation between order statistics (position p * (n - 1)).
double quantile(std::vector<double> xs, double p);
/// prod(1 + r) - 1
double compound(std::span<const double> returns);

struct StrategySummary {
  std::string strategy;
  Metrics overall;  // on the chained hourly series
  std::vector<double> weekly_returns;
  std::vector<double> monthly_returns;  // one per cycle
  std::array<double, 11> quantiles{};   // aligned with quantile_levels()
  std::vector<double> chained_values;   // initial balance times the running product
};

struct MetricAggregate {
  double mean = 0.0, median = 0.0, std = 0.0;  // std with n - 1 denominator
  std::size_t n = 0;                           // finite values used
};

/// Per-metric mean / median / sample std across individual-model summaries. Non-finite or
/// missing values are left out of a metric's statistics.
std::array<MetricAggregate, 6> aggregate_individuals(const std::vector<Metrics>& individuals);

struct Histogram {
  std::vector<double> edges;  // bins + 1, shared by all strategies
  std::map<std::string, std::vector<std::size_t>> counts;
};

Histogram histogram(const std::map<std::string, std::vector<double>>& samples, std::size_t bins);

struct BacktestReport {
  std::vector<std::string> strategies;  // display order
  std::vector<PeriodResult> periods;    // (week, strategy) order
  std::vector<StrategySummary> summaries;
  std::optional<std::array<MetricAggregate, 6>> individual_aggregate;
  Histogram monthly_histogram;
};

BacktestReport distributional_report(std::vector<PeriodResult> results, const Schedule& schedule,
                                     double initial_balance, std::size_t histogram_bins = 20);

}  // namespace cryptoens::backtest
