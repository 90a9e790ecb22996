#include "cryptoens/features.hpp"

#include <algorithm>
#include <cmath>

#include "cryptoens/errors.hpp"
#include "cryptoens/indicators.hpp"

namespace cryptoens::market {

const std::array<const char*, kFeaturesPerAsset>& feature_names() {
  static const std::array<const char*, kFeaturesPerAsset> names{
      "d_open", "d_high", "d_low", "d_close", "d_volume", "sma_short",
      "sma_long", "rsi", "cci", "macd", "adx", "atr"};
  return names;
}

std::size_t IndicatorConfig::warmup() const {
  return std::max({sma_long, sma_short, 2 * adx, rsi + 1, atr + 1, cci, macd_slow + 1});
}

std::size_t FeatureMatrix::row_of(EpochSeconds t) const {
  if (timestamps.empty() || t < timestamps.front() || t > timestamps.back() ||
      (t - timestamps.front()) % kHour != 0)
    throw DataError("timestamp " + format_timestamp(t) + " outside the feature axis");
  return static_cast<std::size_t>((t - timestamps.front()) / kHour);
}

std::vector<std::string> FeatureMatrix::column_names() const {
  std::vector<std::string> out;
  out.reserve(cols());
  for (const auto& a : asset_ids)
    for (const char* f : feature_names()) out.push_back(a + "." + f);
  return out;
}

namespace {

void fill_asset(const AssetSeries& s, const IndicatorConfig& cfg, std::size_t asset,
                std::size_t warmup, FeatureMatrix& fm) {
  namespace ind = indicators;
  const auto c = s.closes();
  const auto h = s.highs();
  const auto l = s.lows();
  const auto changes = pct_change(s);
  const auto sma_s = ind::sma(c, cfg.sma_short);
  const auto sma_l = ind::sma(c, cfg.sma_long);
  const auto rsi = ind::rsi(c, cfg.rsi);
  const auto cci = ind::cci(h, l, c, cfg.cci);
  const auto macd = ind::macd(c, cfg.macd_fast, cfg.macd_slow);
  const auto adx = ind::adx(h, l, c, cfg.adx);
  const auto atr = ind::atr(h, l, c, cfg.atr);

  const std::size_t cols = fm.cols();
  const std::size_t base = asset * kFeaturesPerAsset;
  for (std::size_t r = 0; r < fm.rows(); ++r) {
    const std::size_t t = r + warmup;
    double* row = fm.values.data() + r * cols + base;
    for (std::size_t k = 0; k < 5; ++k) row[k] = changes[t - 1][k];
    row[kSmaShort] = sma_s[t];
    row[kSmaLong] = sma_l[t];
    row[kRsi] = rsi[t];
    row[kCci] = cci[t];
    row[kMacd] = macd[t];
    row[kAdx] = adx[t];
    row[kAtr] = atr[t];
    fm.closes[r * fm.assets() + asset] = c[t];
  }
}

}  // namespace

FeatureMatrix build_features(const std::vector<AssetSeries>& aligned, const IndicatorConfig& cfg,
                             Exec exec) {
  if (aligned.empty()) throw DataError("build_features: no assets");
  if (cfg.expected_assets != 0 && aligned.size() != cfg.expected_assets)
    throw DataError("build_features: expected " + std::to_string(cfg.expected_assets) +
                    " assets, got " + std::to_string(aligned.size()));
  const std::size_t n = aligned.front().size();
  for (const auto& s : aligned) {
    if (s.size() != n || s.bars.front().timestamp != aligned.front().bars.front().timestamp)
      throw DataError("build_features: series are not aligned");
  }
  const std::size_t warmup = cfg.warmup();
  if (n <= warmup)
    throw DataError("build_features: need more than " + std::to_string(warmup) + " bars");

  FeatureMatrix fm;
  for (const auto& s : aligned) fm.asset_ids.push_back(s.asset_id);
  fm.timestamps.resize(n - warmup);
  for (std::size_t r = 0; r < fm.rows(); ++r) fm.timestamps[r] = aligned.front().bars[r + warmup].timestamp;
  fm.values.assign(fm.rows() * fm.cols(), 0.0);
  fm.closes.assign(fm.rows() * fm.assets(), 0.0);

  const auto assets = static_cast<std::ptrdiff_t>(aligned.size());
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t a = 0; a < assets; ++a)
      fill_asset(aligned[static_cast<std::size_t>(a)], cfg, static_cast<std::size_t>(a), warmup, fm);
  } else {
    for (std::ptrdiff_t a = 0; a < assets; ++a)
      fill_asset(aligned[static_cast<std::size_t>(a)], cfg, static_cast<std::size_t>(a), warmup, fm);
  }

  for (double v : fm.values)
    if (!std::isfinite(v)) throw DataError("build_features: non-finite feature after warm-up");
  return fm;
}

std::size_t NormStats::zero_std_count() const {
  return static_cast<std::size_t>(
      std::count_if(columns.begin(), columns.end(), [](const ColumnNorm& c) { return c.zero_std; }));
}

NormStats fit_norm(const FeatureMatrix& fm, EpochSeconds begin, EpochSeconds end) {
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < fm.rows(); ++r)
    if (fm.timestamps[r] >= begin && fm.timestamps[r] < end) rows.push_back(r);
  if (rows.empty()) throw DataError("fit_norm: training range contains no feature rows");

  NormStats stats;
  stats.fit_begin = begin;
  stats.fit_end = end;
  stats.columns.resize(fm.cols());
  const double n = static_cast<double>(rows.size());
  for (std::size_t c = 0; c < fm.cols(); ++c) {
    auto& cn = stats.columns[c];
    const std::size_t kind = c % kFeaturesPerAsset;
    if (kind == kRsi || kind == kAdx) {
      cn.unit_interval = true;
      continue;
    }
    double mean = 0.0;
    for (auto r : rows) mean += fm.values[r * fm.cols() + c];
    mean /= n;
    double var = 0.0;
    for (auto r : rows) {
      const double d = fm.values[r * fm.cols() + c] - mean;
      var += d * d;
    }
    var /= n;
    cn.mean = mean;
    cn.std = std::sqrt(var);
    cn.zero_std = !(cn.std > 1e-12 * std::max(1.0, std::abs(mean)));
  }
  return stats;
}

FeatureMatrix apply_norm(const FeatureMatrix& fm, const NormStats& stats) {
  if (stats.columns.size() != fm.cols()) throw DataError("apply_norm: column count mismatch");
  FeatureMatrix out = fm;
  const std::size_t cols = fm.cols();
  for (std::size_t r = 0; r < fm.rows(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      double& v = out.values[r * cols + c];
      const auto& cn = stats.columns[c];
      if (cn.unit_interval)
        v = v / 100.0 - 0.5;
      else if (cn.zero_std)
        v = 0.0;
      else
        v = (v - cn.mean) / cn.std;
    }
  }
  return out;
}

NormalizedFeatures fit_apply_norm(const FeatureMatrix& fm, EpochSeconds begin, EpochSeconds end) {
  auto stats = fit_norm(fm, begin, end);
  auto matrix = apply_norm(fm, stats);
  return {std::move(matrix), std::move(stats)};
}

}  // namespace cryptoens::market
