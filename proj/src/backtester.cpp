#include "cryptoens/backtester.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>

#include "cryptoens/agent.hpp"
#include "cryptoens/errors.hpp"
#include "cryptoens/rng.hpp"

namespace cryptoens::backtest {

Schedule build_schedule(EpochSeconds data_begin, EpochSeconds test_begin, EpochSeconds test_end,
                        int train_months) {
  if (train_months <= 0) throw ConfigError("train_months must be positive");
  if (!is_month_start(test_begin)) throw ConfigError("test start must be 00:00 UTC on the 1st of a month");
  if (test_end <= test_begin || (test_end - test_begin) % kHour != 0)
    throw ConfigError("test end must be a whole number of hours after the test start");
  const EpochSeconds first_train = add_months(test_begin, -train_months);
  if (data_begin > first_train)
    throw DataError("insufficient history: the first training window starts at " +
                    format_timestamp(first_train) + " but usable data begins at " +
                    format_timestamp(data_begin));

  Schedule s;
  std::vector<RetrainCycle> months;
  for (EpochSeconds m = test_begin; m < test_end; m = add_months(m, 1)) {
    RetrainCycle c;
    c.train_begin = add_months(m, -train_months);
    c.train_end = m;
    c.test_begin = m;
    c.test_end = std::min(add_months(m, 1), test_end);
    months.push_back(c);
  }

  const auto total = test_end - test_begin;
  const std::size_t n_weeks = std::max<std::size_t>(1, static_cast<std::size_t>(total / kWeek));
  std::vector<std::size_t> month_of_week(n_weeks);
  std::size_t mi = 0;
  for (std::size_t w = 0; w < n_weeks; ++w) {
    const EpochSeconds start = test_begin + static_cast<EpochSeconds>(w) * kWeek;
    while (months[mi].test_end <= start) ++mi;
    month_of_week[w] = mi;
  }
  std::vector<std::size_t> remap(months.size(), months.size());
  for (std::size_t w = 0; w < n_weeks; ++w) {
    const std::size_t m = month_of_week[w];
    if (remap[m] == months.size()) {
      remap[m] = s.cycles.size();
      months[m].id = s.cycles.size();
      s.cycles.push_back(months[m]);
    }
    WeekPeriod wp;
    wp.id = w;
    wp.cycle = remap[m];
    wp.start = test_begin + static_cast<EpochSeconds>(w) * kWeek;
    wp.end = w + 1 == n_weeks ? test_end : wp.start + kWeek;
    s.cycles[wp.cycle].weeks.push_back(w);
    s.weeks.push_back(wp);
  }
  return s;
}

env::EpisodeRange episode_for(const market::FeatureMatrix& fm, EpochSeconds start, EpochSeconds end) {
  if (end <= start) throw DataError("empty period");
  return {fm.row_of(start - kHour), fm.row_of(end - kHour)};
}

std::vector<double> hourly_returns(std::span<const double> v) {
  if (v.size() < 2) throw DataError("metrics need at least two values");
  std::vector<double> r(v.size() - 1);
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i - 1] > 0)) throw DataError("metrics need positive portfolio values");
    r[i - 1] = v[i] / v[i - 1] - 1.0;
  }
  return r;
}

double annualized_return(std::span<const double> v, double hours) {
  if (!(hours >= 1)) throw DataError("annualized_return: hours must be >= 1");
  if (v.empty() || !(v.front() > 0) || !(v.back() > 0))
    throw DataError("annualized_return: non-positive portfolio value");
  return std::pow(v.back() / v.front(), kHoursPerYear / hours) - 1.0;
}

namespace {

struct Moments {
  double mean = 0.0, std = 0.0, downside = 0.0;
};

Moments moments(std::span<const double> values) {
  const auto r = hourly_returns(values);
  const double n = static_cast<double>(r.size());
  Moments m;
  for (double x : r) m.mean += x;
  m.mean /= n;
  double var = 0.0, down = 0.0;
  for (double x : r) {
    var += (x - m.mean) * (x - m.mean);
    const double neg = std::min(x, 0.0);
    down += neg * neg;
  }
  m.std = std::sqrt(var / n);
  m.downside = std::sqrt(down / n);
  return m;
}

const double kAnnual = std::sqrt(kHoursPerYear);

}  // namespace

std::optional<double> sharpe(std::span<const double> values) {
  const auto m = moments(values);
  if (m.std == 0.0) return std::nullopt;
  return m.mean / m.std * kAnnual;
}

std::optional<double> sortino(std::span<const double> values) {
  const auto m = moments(values);
  if (m.downside == 0.0) {
    if (m.mean > 0) return std::numeric_limits<double>::infinity();
    return std::nullopt;
  }
  return m.mean / m.downside * kAnnual;
}

double volatility(std::span<const double> values) { return moments(values).std * kAnnual; }

double max_drawdown(std::span<const double> v) {
  if (v.size() < 2) throw DataError("metrics need at least two values");
  double peak = v.front(), mdd = 0.0;
  for (double x : v) {
    peak = std::max(peak, x);
    mdd = std::max(mdd, 1.0 - x / peak);
  }
  return mdd;
}

Metrics compute_metrics(std::span<const double> values) {
  Metrics m;
  m.cumulative_return = values.back() / values.front() - 1.0;
  m.annualized_return = annualized_return(values, static_cast<double>(values.size() - 1));
  m.sortino = sortino(values);
  m.sharpe = sharpe(values);
  m.max_drawdown = max_drawdown(values);
  m.volatility = volatility(values);
  return m;
}

const std::array<const char*, 6>& metric_names() {
  static const std::array<const char*, 6> names = {
      "annualized_return", "cumulative_return", "sortino", "sharpe", "max_drawdown", "volatility"};
  return names;
}

std::optional<double> metric_value(const Metrics& m, std::size_t index) {
  switch (index) {
    case 0: return m.annualized_return;
    case 1: return m.cumulative_return;
    case 2: return m.sortino;
    case 3: return m.sharpe;
    case 4: return m.max_drawdown;
    case 5: return m.volatility;
    default: throw std::out_of_range("metric index");
  }
}

std::string Strategy::name() const {
  switch (kind) {
    case StrategyKind::Ensemble: return "ensemble";
    case StrategyKind::FinalEpoch: return "final_epoch";
    case StrategyKind::Individual: return "individual_" + std::to_string(index);
    case StrategyKind::BuyAndHold: return "buy_and_hold";
  }
  return "unknown";
}

std::vector<double> buy_and_hold_values(const market::FeatureMatrix& fm, env::EpisodeRange range,
                                        double initial_balance) {
  if (range.end <= range.begin || range.end >= fm.rows()) throw DataError("buy_and_hold: bad range");
  const std::size_t D = fm.assets();
  std::vector<double> units(D);
  const auto p0 = fm.close_row(range.begin);
  for (std::size_t d = 0; d < D; ++d) units[d] = initial_balance / static_cast<double>(D) / p0[d];
  std::vector<double> values;
  values.reserve(range.steps() + 1);
  values.push_back(initial_balance);
  for (std::size_t r = range.begin + 1; r <= range.end; ++r) {
    const auto p = fm.close_row(r);
    double v = 0.0;
    for (std::size_t d = 0; d < D; ++d) v += units[d] * p[d];
    values.push_back(v);
  }
  return values;
}

std::vector<Strategy> strategies_for(std::size_t K, bool individuals) {
  std::vector<Strategy> out = {{StrategyKind::Ensemble, 0}, {StrategyKind::FinalEpoch, 0}};
  if (individuals)
    for (std::size_t k = 1; k <= K; ++k) out.push_back({StrategyKind::Individual, k});
  out.push_back({StrategyKind::BuyAndHold, 0});
  return out;
}

PeriodResult run_strategy(const Strategy& strategy, std::span<const nn::NetworkWeights* const> models,
                          std::shared_ptr<const market::FeatureMatrix> features, const WeekPeriod& week,
                          const BacktestOptions& opt) {
  PeriodResult res;
  res.week = week.id;
  res.cycle = week.cycle;
  res.strategy = strategy.name();
  const auto range = episode_for(*features, week.start, week.end);
  if (strategy.kind == StrategyKind::BuyAndHold) {
    res.values = buy_and_hold_values(*features, range, opt.env.initial_balance);
  } else {
    if (models.empty()) throw ModelError("strategy " + res.strategy + " has no snapshot");
    env::TradingEnv env(features, opt.env);
    // Model strategies share one seed per period so they face the same random stream.
    const auto seed = derive_seed(opt.seed, {week.id});
    res.values = agent::run_episode(models, env, range,
                                    opt.greedy ? agent::ActionMode::Greedy : agent::ActionMode::Stochastic,
                                    seed)
                     .values;
  }
  res.weekly_return = res.values.back() / res.values.front() - 1.0;
  res.metrics = compute_metrics(res.values);
  return res;
}

std::vector<PeriodResult> run_cycle(std::shared_ptr<const market::FeatureMatrix> features,
                                    const Schedule& schedule, std::size_t cycle,
                                    const CycleModels& models, const BacktestOptions& opt) {
  const auto& c = schedule.cycles.at(cycle);
  if (models.best.empty() || !models.final_epoch)
    throw ModelError("cycle " + std::to_string(cycle) + " is missing snapshots");
  std::vector<const nn::NetworkWeights*> ensemble;
  for (const auto& m : models.best) ensemble.push_back(m.get());
  const nn::NetworkWeights* final_model = models.final_epoch.get();

  const auto strategies = strategies_for(models.best.size(), opt.individuals);
  const std::size_t S = strategies.size();
  const std::size_t jobs = c.weeks.size() * S;
  std::vector<PeriodResult> out(jobs);
  std::vector<std::exception_ptr> errors(jobs);
#pragma omp parallel for schedule(dynamic, 1) if (opt.exec == Exec::Parallel && jobs > 1)
  for (std::size_t j = 0; j < jobs; ++j) {
    try {
      const auto& week = schedule.weeks.at(c.weeks[j / S]);
      const auto& st = strategies[j % S];
      std::span<const nn::NetworkWeights* const> members;
      switch (st.kind) {
        case StrategyKind::Ensemble: members = ensemble; break;
        case StrategyKind::FinalEpoch: members = {&final_model, 1}; break;
        case StrategyKind::Individual: members = {&ensemble[st.index - 1], 1}; break;
        case StrategyKind::BuyAndHold: break;
      }
      out[j] = run_strategy(st, members, features, week, opt);
    } catch (...) {
      errors[j] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

const std::array<double, 11>& quantile_levels() {
  static const std::array<double, 11> levels = {1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.0};
  return levels;
}

double quantile(std::vector<double> xs, double p) {
  if (xs.empty()) throw DataError("quantile of an empty sample");
  std::sort(xs.begin(), xs.end());
  const double h = p * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= xs.size()) return xs.back();
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[lo + 1] - xs[lo]);
}

double compound(std::span<const double> returns) {
  double g = 1.0;
  for (double r : returns) g *= 1.0 + r;
  return g - 1.0;
}

std::array<MetricAggregate, 6> aggregate_individuals(const std::vector<Metrics>& individuals) {
  if (individuals.size() < 2) throw DataError("aggregate_individuals needs at least two models");
  std::array<MetricAggregate, 6> out{};
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::vector<double> xs;
    for (const auto& m : individuals) {
      const auto v = metric_value(m, k);
      if (v && std::isfinite(*v)) xs.push_back(*v);
    }
    auto& a = out[k];
    a.n = xs.size();
    if (xs.empty()) continue;
    a.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    a.median = quantile(xs, 0.5);
    if (xs.size() > 1) {
      double ss = 0.0;
      for (double x : xs) ss += (x - a.mean) * (x - a.mean);
      a.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
  }
  return out;
}

Histogram histogram(const std::map<std::string, std::vector<double>>& samples, std::size_t bins) {
  Histogram h;
  if (bins == 0) throw ConfigError("histogram needs at least one bin");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& [_, xs] : samples)
    for (double x : xs) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  if (!std::isfinite(lo)) return h;
  if (hi == lo) {
    lo -= 0.5e-3;
    hi += 0.5e-3;
  }
  h.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i)
    h.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  h.edges.back() = hi;
  for (const auto& [name, xs] : samples) {
    auto& c = h.counts[name];
    c.assign(bins, 0);
    for (double x : xs) {
      auto b = static_cast<std::size_t>(std::floor((x - lo) / (hi - lo) * static_cast<double>(bins)));
      ++c[std::min(b, bins - 1)];
    }
  }
  return h;
}

BacktestReport distributional_report(std::vector<PeriodResult> results, const Schedule& schedule,
                                     double initial_balance, std::size_t histogram_bins) {
  BacktestReport rep;
  for (const auto& r : results)
    if (std::find(rep.strategies.begin(), rep.strategies.end(), r.strategy) == rep.strategies.end())
      rep.strategies.push_back(r.strategy);
  std::stable_sort(results.begin(), results.end(), [&](const PeriodResult& a, const PeriodResult& b) {
    if (a.week != b.week) return a.week < b.week;
    const auto ia = std::find(rep.strategies.begin(), rep.strategies.end(), a.strategy);
    const auto ib = std::find(rep.strategies.begin(), rep.strategies.end(), b.strategy);
    return ia < ib;
  });

  std::map<std::string, std::vector<double>> monthly;
  std::vector<Metrics> individual_metrics;
  for (const auto& name : rep.strategies) {
    StrategySummary s;
    s.strategy = name;
    std::vector<const PeriodResult*> rows;
    for (const auto& r : results)
      if (r.strategy == name) rows.push_back(&r);
    s.chained_values.push_back(initial_balance);
    for (const auto* r : rows) {
      s.weekly_returns.push_back(r->weekly_return);
      const double base = s.chained_values.back();
      for (std::size_t t = 1; t < r->values.size(); ++t)
        s.chained_values.push_back(base * (r->values[t] / r->values.front()));
    }
    for (const auto& c : schedule.cycles) {
      std::vector<double> wk;
      for (const auto* r : rows)
        if (r->cycle == c.id) wk.push_back(r->weekly_return);
      if (!wk.empty()) s.monthly_returns.push_back(compound(wk));
    }
    for (std::size_t i = 0; i < s.quantiles.size(); ++i)
      s.quantiles[i] = quantile(s.weekly_returns, quantile_levels()[i]);
    s.overall = compute_metrics(s.chained_values);
    if (name.rfind("individual_", 0) == 0) individual_metrics.push_back(s.overall);
    monthly[name] = s.monthly_returns;
    rep.summaries.push_back(std::move(s));
  }
  if (individual_metrics.size() >= 2) rep.individual_aggregate = aggregate_individuals(individual_metrics);
  rep.monthly_histogram = histogram(monthly, histogram_bins);
  rep.periods = std::move(results);
  return rep;
}

}  // namespace cryptoens::backtest
