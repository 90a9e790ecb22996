#include "cryptoens/market_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cryptoens/errors.hpp"

namespace cryptoens::market {
namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string token;
  std::istringstream ss(line);
  while (std::getline(ss, token, ',')) out.push_back(trim(token));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& token) {
  std::size_t pos = 0;
  const double v = std::stod(token, &pos);
  if (pos != token.size() || !std::isfinite(v)) throw std::invalid_argument(token);
  return v;
}

template <class Get>
std::vector<double> column(const std::vector<OhlcvBar>& bars, Get get) {
  std::vector<double> out(bars.size());
  std::transform(bars.begin(), bars.end(), out.begin(), get);
  return out;
}

}  // namespace

std::vector<double> AssetSeries::closes() const {
  return column(bars, [](const OhlcvBar& b) { return b.close; });
}
std::vector<double> AssetSeries::highs() const {
  return column(bars, [](const OhlcvBar& b) { return b.high; });
}
std::vector<double> AssetSeries::lows() const {
  return column(bars, [](const OhlcvBar& b) { return b.low; });
}

void validate_bar(const OhlcvBar& b) {
  if (!(b.open > 0 && b.high > 0 && b.low > 0 && b.close > 0))
    throw DataError("non-positive price");
  if (b.low > b.high) throw DataError("high < low");
  if (b.low > std::min(b.open, b.close)) throw DataError("low above open/close");
  if (b.high < std::max(b.open, b.close)) throw DataError("high below open/close");
  if (!(b.volume >= 0)) throw DataError("negative volume");
}

AssetSeries parse_csv(const std::string& text, const std::string& asset_id,
                      const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  AssetSeries series;
  series.asset_id = asset_id;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cols = split(t);
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (!header_seen) {
      static const std::vector<std::string> expected{"timestamp", "open", "high",
                                                     "low",       "close", "volume"};
      std::vector<std::string> lower = cols;
      for (auto& c : lower) std::transform(c.begin(), c.end(), c.begin(), ::tolower);
      if (lower != expected)
        throw DataError(where + "expected header timestamp,open,high,low,close,volume");
      header_seen = true;
      continue;
    }
    if (cols.size() != 6)
      throw DataError(where + "expected 6 columns, found " + std::to_string(cols.size()));
    OhlcvBar bar;
    try {
      bar.timestamp = parse_timestamp(cols[0]);
      bar.open = parse_number(cols[1]);
      bar.high = parse_number(cols[2]);
      bar.low = parse_number(cols[3]);
      bar.close = parse_number(cols[4]);
      bar.volume = parse_number(cols[5]);
    } catch (const std::invalid_argument& e) {
      throw DataError(where + "malformed row (" + e.what() + ")");
    } catch (const std::out_of_range&) {
      throw DataError(where + "number out of range");
    }
    if (bar.timestamp % kHour != 0) throw DataError(where + "timestamp not on an hour boundary");
    try {
      validate_bar(bar);
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
    series.bars.push_back(bar);
  }
  if (!header_seen) throw DataError(source + ": empty file");

  std::stable_sort(series.bars.begin(), series.bars.end(),
                   [](const OhlcvBar& a, const OhlcvBar& b) { return a.timestamp < b.timestamp; });
  for (std::size_t i = 1; i < series.bars.size(); ++i) {
    const auto dt = series.bars[i].timestamp - series.bars[i - 1].timestamp;
    if (dt == 0)
      throw DataError(source + ": duplicate timestamp " +
                      format_timestamp(series.bars[i].timestamp));
    series.gaps += static_cast<std::size_t>(dt / kHour - 1);
  }
  return series;
}

AssetSeries load_csv(const std::filesystem::path& path, const std::string& asset_id) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open data file for asset " + asset_id + ": " + path.string());
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_csv(buf.str(), asset_id, path.string());
}

std::vector<AssetSeries> align_and_fill(const std::vector<AssetSeries>& series_set) {
  if (series_set.empty()) throw DataError("align_and_fill: no series");
  EpochSeconds start = series_set.front().bars.empty() ? 0 : series_set.front().bars.front().timestamp;
  EpochSeconds end = series_set.front().bars.empty() ? -1 : series_set.front().bars.back().timestamp;
  for (const auto& s : series_set) {
    if (s.bars.empty()) throw DataError("align_and_fill: series " + s.asset_id + " is empty");
    start = std::max(start, s.bars.front().timestamp);
    end = std::min(end, s.bars.back().timestamp);
  }
  if (start > end) throw DataError("align_and_fill: empty time intersection");

  const auto hours = static_cast<std::size_t>((end - start) / kHour + 1);
  std::vector<AssetSeries> out;
  out.reserve(series_set.size());
  for (const auto& s : series_set) {
    AssetSeries a;
    a.asset_id = s.asset_id;
    a.bars.reserve(hours);
    // Last bar at or before `start` seeds the forward fill.
    auto it = std::upper_bound(s.bars.begin(), s.bars.end(), start,
                               [](EpochSeconds t, const OhlcvBar& b) { return t < b.timestamp; });
    const OhlcvBar* prev = &*(it - 1);
    for (std::size_t h = 0; h < hours; ++h) {
      const EpochSeconds t = start + static_cast<EpochSeconds>(h) * kHour;
      while (it != s.bars.end() && it->timestamp < t) prev = &*it++;
      if (it != s.bars.end() && it->timestamp == t) {
        a.bars.push_back(*it);
        prev = &*it++;
      } else if (prev->timestamp == t) {
        a.bars.push_back(*prev);
      } else {
        const double c = prev->close;
        a.bars.push_back(OhlcvBar{t, c, c, c, c, 0.0});
        ++a.gaps;
      }
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<std::array<double, 5>> pct_change(const AssetSeries& series) {
  if (series.size() < 2) throw DataError("pct_change: series " + series.asset_id + " shorter than 2");
  std::vector<std::array<double, 5>> out(series.size() - 1);
  for (std::size_t t = 1; t < series.size(); ++t) {
    const auto& p = series.bars[t - 1];
    const auto& c = series.bars[t];
    auto& o = out[t - 1];
    o[0] = (c.open - p.open) / p.open;
    o[1] = (c.high - p.high) / p.high;
    o[2] = (c.low - p.low) / p.low;
    o[3] = (c.close - p.close) / p.close;
    o[4] = p.volume == 0.0 ? 0.0 : (c.volume - p.volume) / p.volume;
  }
  return out;
}

}  // namespace cryptoens::market
