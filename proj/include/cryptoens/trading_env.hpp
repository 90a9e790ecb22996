#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "cryptoens/features.hpp"

namespace cryptoens::env {

struct AccountState {
  std::vector<double> holdings;  // units per asset, >= 0
  double balance = 0.0;          // USD, >= 0

  double value(std::span<const double> prices) const;
};

struct EnvConfig {
  double initial_balance = 1'000'000.0;
  double hmax_base = 70.0;
  std::size_t reference_asset = 0;  // BTC
  double account_cap_factor = 2.0;
  std::size_t window = 12;
};

/// hmax_ref = base; hmax_d = base * price_ref / price_d, equalizing notional trade caps.
std::vector<double> compute_hmax(std::span<const double> initial_prices, double hmax_base,
                                 std::size_t reference_asset);

/// Sells first (clamped to holdings), then buys at close; if buys cost more than the
/// balance, every buy is scaled by balance / cost. Never fails; H >= 0 and b >= 0 hold.
AccountState execute_trades(const AccountState& acct, std::span<const double> action,
                            std::span<const double> close);

/// Feature rows are addressed by index. Actions are taken at the close of rows
/// begin..end-1 and the portfolio is revalued at rows begin+1..end, so an episode has
/// end - begin steps and end - begin + 1 portfolio values.
struct EpisodeRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t steps() const { return end - begin; }
};

/// The observation: `window` rows of [market features, normalized holdings, normalized
/// balance] in chronological order, so the last row describes the current hour.
struct EnvState {
  std::vector<double> window;  // window_len x obs_dim, row-major
  AccountState account;
  std::size_t t = 0;
};

struct StepResult {
  double reward = 0.0;  // V_{t+1} - V_t in USD
  bool done = false;
  double value = 0.0;  // V_{t+1}
};

/// Portfolio MDP over a normalized feature matrix. Owns its state; one instance per thread.
class TradingEnv {
 public:
  TradingEnv(std::shared_ptr<const market::FeatureMatrix> features, EnvConfig cfg = {});

  std::size_t assets() const { return features_->assets(); }
  std::size_t obs_dim() const { return features_->cols() + assets() + 1; }
  std::size_t window_len() const { return cfg_.window; }
  const EnvConfig& config() const { return cfg_; }
  const market::FeatureMatrix& features() const { return *features_; }

  const EnvState& reset(EpisodeRange range);
  StepResult step(std::span<const double> action);

  /// One observation row for account `acct` at feature row t, using the caps fixed at reset.
  std::vector<double> observe(const AccountState& acct, std::size_t t);

  const EnvState& state() const { return state_; }
  const std::vector<double>& hmax() const { return hmax_; }
  const std::vector<double>& holding_caps() const { return holding_cap_; }
  double balance_cap() const { return balance_cap_; }
  double portfolio_value() const;
  std::size_t clip_count() const { return clip_count_; }
  bool done() const { return state_.t >= range_.end; }
  const EpisodeRange& range() const { return range_; }

 private:
  void write_row(const AccountState& acct, std::size_t t, std::span<double> out);

  std::shared_ptr<const market::FeatureMatrix> features_;
  EnvConfig cfg_;
  EpisodeRange range_;
  EnvState state_;
  std::vector<double> hmax_;
  std::vector<double> holding_cap_;
  double balance_cap_ = 0.0;
  std::size_t clip_count_ = 0;
};

}  // namespace cryptoens::env
