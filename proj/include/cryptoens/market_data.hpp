#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cryptoens/time_util.hpp"

namespace cryptoens::market {

struct OhlcvBar {
  EpochSeconds timestamp = 0;  // start of the hour, UTC
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double volume = 0.0;
};

/// Hourly bars for one asset, strictly increasing by one hour once aligned.
struct AssetSeries {
  std::string asset_id;
  std::vector<OhlcvBar> bars;
  /// Hours missing between consecutive bars as loaded (before align_and_fill).
  std::size_t gaps = 0;

  std::size_t size() const { return bars.size(); }
  std::vector<double> closes() const;
  std::vector<double> highs() const;
  std::vector<double> lows() const;
};

/// Throws DataError naming the violated invariant.
void validate_bar(const OhlcvBar& bar);

/// Parses `timestamp,open,high,low,close,volume` CSV text (header required). Rows are
/// sorted ascending; duplicate timestamps are rejected. `source` labels error messages.
AssetSeries parse_csv(const std::string& text, const std::string& asset_id,
                      const std::string& source = "<memory>");
AssetSeries load_csv(const std::filesystem::path& path, const std::string& asset_id);

/// Restricts every series to the common time range and forward-fills missing hours from
/// the previous close with zero volume. Output time axes are identical.
std::vector<AssetSeries> align_and_fill(const std::vector<AssetSeries>& series_set);

/// Per bar t >= 1: (x_t - x_{t-1}) / x_{t-1} for open, high, low, close, volume.
/// A zero previous volume maps the volume change to 0.
std::vector<std::array<double, 5>> pct_change(const AssetSeries& series);

}  // namespace cryptoens::market
