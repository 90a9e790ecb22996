#include "cryptoens/trading_env.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "cryptoens/errors.hpp"

namespace cryptoens::env {

double AccountState::value(std::span<const double> prices) const {
  double v = balance;
  for (std::size_t d = 0; d < holdings.size(); ++d) v += holdings[d] * prices[d];
  return v;
}

std::vector<double> compute_hmax(std::span<const double> initial_prices, double hmax_base,
                                 std::size_t reference_asset) {
  if (reference_asset >= initial_prices.size()) throw ConfigError("reference asset out of range");
  if (!(hmax_base > 0)) throw ConfigError("hmax must be positive");
  for (double p : initial_prices)
    if (!(p > 0)) throw DataError("compute_hmax: non-positive price");
  std::vector<double> out(initial_prices.size());
  const double ref = initial_prices[reference_asset];
  for (std::size_t d = 0; d < out.size(); ++d)
    out[d] = d == reference_asset ? hmax_base : hmax_base * (ref / initial_prices[d]);
  return out;
}

AccountState execute_trades(const AccountState& acct, std::span<const double> action,
                            std::span<const double> close) {
  AccountState next = acct;
  const std::size_t n = acct.holdings.size();
  for (std::size_t d = 0; d < n; ++d) {
    if (action[d] < 0) {
      const double qty = std::min(-action[d], next.holdings[d]);
      next.holdings[d] -= qty;
      next.balance += qty * close[d];
    }
  }
  double cost = 0.0;
  for (std::size_t d = 0; d < n; ++d)
    if (action[d] > 0) cost += action[d] * close[d];
  if (cost <= 0.0) return next;

  if (cost > next.balance) {
    const double scale = next.balance / cost;
    for (std::size_t d = 0; d < n; ++d)
      if (action[d] > 0) next.holdings[d] += action[d] * scale;
    next.balance = 0.0;
  } else {
    for (std::size_t d = 0; d < n; ++d)
      if (action[d] > 0) next.holdings[d] += action[d];
    next.balance = std::max(0.0, next.balance - cost);
  }
  return next;
}

TradingEnv::TradingEnv(std::shared_ptr<const market::FeatureMatrix> features, EnvConfig cfg)
    : features_(std::move(features)), cfg_(cfg) {
  if (!features_) throw ConfigError("TradingEnv: null feature matrix");
  if (!(cfg_.initial_balance > 0)) throw ConfigError("initial balance must be positive");
  if (!(cfg_.hmax_base > 0)) throw ConfigError("hmax must be positive");
  if (cfg_.window == 0) throw ConfigError("window must be >= 1");
}

void TradingEnv::write_row(const AccountState& acct, std::size_t t, std::span<double> out) {
  const auto feats = features_->row(t);
  std::copy(feats.begin(), feats.end(), out.begin());
  auto clip = [this](double x) {
    if (x > 1.0) {
      ++clip_count_;
      return 1.0;
    }
    return std::max(0.0, x);
  };
  const std::size_t base = feats.size();
  for (std::size_t d = 0; d < assets(); ++d) out[base + d] = clip(acct.holdings[d] / holding_cap_[d]);
  out[base + assets()] = clip(acct.balance / balance_cap_);
}

std::vector<double> TradingEnv::observe(const AccountState& acct, std::size_t t) {
  if (t >= features_->rows()) throw DataError("observe: row outside the feature matrix");
  std::vector<double> row(obs_dim());
  write_row(acct, t, row);
  return row;
}

const EnvState& TradingEnv::reset(EpisodeRange range) {
  if (range.end <= range.begin || range.begin + 1 < cfg_.window || range.end >= features_->rows())
    throw DataError("reset: episode range too short or outside feature coverage");
  range_ = range;
  const auto prices = features_->close_row(range.begin);
  hmax_ = compute_hmax(prices, cfg_.hmax_base, cfg_.reference_asset);
  holding_cap_.resize(assets());
  for (std::size_t d = 0; d < assets(); ++d)
    holding_cap_[d] = cfg_.account_cap_factor * cfg_.initial_balance / prices[d];
  balance_cap_ = cfg_.account_cap_factor * cfg_.initial_balance;
  clip_count_ = 0;

  state_.account.holdings.assign(assets(), 0.0);
  state_.account.balance = cfg_.initial_balance;
  state_.t = range.begin;
  const std::size_t dim = obs_dim();
  state_.window.assign(cfg_.window * dim, 0.0);
  for (std::size_t k = 0; k < cfg_.window; ++k) {
    const std::size_t row = range.begin + 1 + k - cfg_.window;
    write_row(state_.account, row, std::span<double>(state_.window).subspan(k * dim, dim));
  }
  return state_;
}

double TradingEnv::portfolio_value() const {
  return state_.account.value(features_->close_row(state_.t));
}

StepResult TradingEnv::step(std::span<const double> action) {
  if (done()) throw ModelError("step called on a finished episode");
  if (action.size() != assets()) throw ModelError("step: action dimension mismatch");
  const std::size_t t = state_.t;
  const double v_before = state_.account.value(features_->close_row(t));
  state_.account = execute_trades(state_.account, action, features_->close_row(t));
  state_.t = t + 1;
  const double v_after = state_.account.value(features_->close_row(t + 1));

  const std::size_t dim = obs_dim();
  std::memmove(state_.window.data(), state_.window.data() + dim,
               (cfg_.window - 1) * dim * sizeof(double));
  write_row(state_.account, t + 1,
            std::span<double>(state_.window).subspan((cfg_.window - 1) * dim, dim));
  return {v_after - v_before, done(), v_after};
}

}  // namespace cryptoens::env
