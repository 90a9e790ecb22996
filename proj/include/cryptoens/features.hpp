#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cryptoens/exec.hpp"
#include "cryptoens/market_data.hpp"

namespace cryptoens::market {

inline constexpr std::size_t kFeaturesPerAsset = 12;

/// Per-asset column order inside a feature row.
enum FeatureColumn : std::size_t {
  kOpenChange = 0,
  kHighChange,
  kLowChange,
  kCloseChange,
  kVolumeChange,
  kSmaShort,
  kSmaLong,
  kRsi,
  kCci,
  kMacd,
  kAdx,
  kAtr,
};

const std::array<const char*, kFeaturesPerAsset>& feature_names();

struct IndicatorConfig {
  std::size_t sma_short = 30;
  std::size_t sma_long = 60;
  std::size_t rsi = 14;
  std::size_t cci = 20;
  std::size_t atr = 14;
  std::size_t adx = 14;
  std::size_t macd_fast = 12;
  std::size_t macd_slow = 26;
  /// 0 accepts any asset count.
  std::size_t expected_assets = 5;

  /// Number of leading bars dropped so every indicator is defined (60 with defaults).
  std::size_t warmup() const;
};

/// Row-major matrix of market features on a shared hourly time axis.
struct FeatureMatrix {
  std::vector<std::string> asset_ids;
  std::vector<EpochSeconds> timestamps;
  std::vector<double> values;  // rows() x cols()
  std::vector<double> closes;  // rows() x assets(), raw close prices aligned with rows

  std::size_t assets() const { return asset_ids.size(); }
  std::size_t cols() const { return assets() * kFeaturesPerAsset; }
  std::size_t rows() const { return timestamps.size(); }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols(), cols()}; }
  std::span<double> row(std::size_t r) { return {values.data() + r * cols(), cols()}; }
  double close(std::size_t r, std::size_t asset) const { return closes[r * assets() + asset]; }
  std::span<const double> close_row(std::size_t r) const {
    return {closes.data() + r * assets(), assets()};
  }

  /// Row index of an hourly timestamp; throws DataError when outside the axis.
  std::size_t row_of(EpochSeconds t) const;
  std::vector<std::string> column_names() const;
};

/// Builds the 12-per-asset layout in the given asset order, dropping warm-up rows.
/// Exec::Parallel computes assets concurrently; output is identical to Exec::Serial.
FeatureMatrix build_features(const std::vector<AssetSeries>& aligned, const IndicatorConfig& cfg = {},
                             Exec exec = Exec::Parallel);

struct ColumnNorm {
  bool unit_interval = false;  // RSI/ADX: x / 100 - 0.5
  double mean = 0.0;
  double std = 1.0;
  bool zero_std = false;  // feature passes through as 0
};

struct NormStats {
  EpochSeconds fit_begin = 0;  // inclusive
  EpochSeconds fit_end = 0;    // exclusive
  std::vector<ColumnNorm> columns;
  std::size_t zero_std_count() const;
};

/// Fits standardization stats on rows with timestamps in [begin, end) only.
NormStats fit_norm(const FeatureMatrix& fm, EpochSeconds begin, EpochSeconds end);
FeatureMatrix apply_norm(const FeatureMatrix& fm, const NormStats& stats);

struct NormalizedFeatures {
  FeatureMatrix matrix;
  NormStats stats;
};
NormalizedFeatures fit_apply_norm(const FeatureMatrix& fm, EpochSeconds begin, EpochSeconds end);

}  // namespace cryptoens::market
