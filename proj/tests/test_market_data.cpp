#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "cryptoens/errors.hpp"
#include "cryptoens/features.hpp"
#include "cryptoens/indicators.hpp"
#include "cryptoens/market_data.hpp"
#include "oracles/indicator_oracles.hpp"
#include "support.hpp"

using namespace cryptoens;
using namespace cryptoens::market;
namespace ind = cryptoens::indicators;
using testing_support::random_series;

namespace {

void check_close(const std::vector<double>& got, const std::vector<double>& want, double tol) {
  REQUIRE(got.size() == want.size());
  for (std::size_t t = 0; t < got.size(); ++t) {
    INFO("t = " << t);
    if (std::isnan(want[t])) {
      CHECK(std::isnan(got[t]));
    } else {
      CHECK(std::abs(got[t] - want[t]) <= tol * std::max(1.0, std::abs(want[t])));
    }
  }
}

AssetSeries constant_series(std::size_t n, double price, EpochSeconds t0 = 1514764800) {
  AssetSeries s;
  s.asset_id = "C";
  for (std::size_t i = 0; i < n; ++i)
    s.bars.push_back({t0 + static_cast<EpochSeconds>(i) * kHour, price, price, price, price, 10.0});
  return s;
}

const char* kHeader = "timestamp,open,high,low,close,volume\n";

}  // namespace

TEST_CASE("parse_csv reads a well-formed three-row file") {
  const std::string text = std::string(kHeader) +
                           "1514764800,10,11,9,10.5,100\n"
                           "1514768400,10.5,12,10,11,50\n"
                           "2018-01-01T02:00:00Z,11,11.5,10.8,11.2,0\n";
  const auto s = parse_csv(text, "XBT");
  REQUIRE(s.size() == 3);
  CHECK(s.asset_id == "XBT");
  CHECK(s.bars[2].timestamp == 1514764800 + 2 * kHour);
  CHECK(s.bars[1].close == 11.0);
  CHECK(s.gaps == 0);
}

TEST_CASE("parse_csv sorts shuffled rows") {
  const std::string text = std::string(kHeader) +
                           "1514772000,11,11.5,10.8,11.2,0\n"
                           "1514764800,10,11,9,10.5,100\n"
                           "1514768400,10.5,12,10,11,50\n";
  const auto s = parse_csv(text, "XBT");
  REQUIRE(s.size() == 3);
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s.bars[i].timestamp - s.bars[i - 1].timestamp == kHour);
}

TEST_CASE("parse_csv rejects invalid bars with the line number") {
  SUBCASE("high below low") {
    const std::string text = std::string(kHeader) + "1514764800,10,9,11,10,1\n";
    CHECK_THROWS_WITH_AS(parse_csv(text, "X", "x.csv"), doctest::Contains("x.csv:2"), DataError);
  }
  SUBCASE("non-positive price") {
    const std::string text = std::string(kHeader) + "1514764800,10,11,9,10,1\n1514768400,0,11,0,10,1\n";
    CHECK_THROWS_WITH_AS(parse_csv(text, "X", "x.csv"), doctest::Contains("x.csv:3"), DataError);
  }
  SUBCASE("malformed number") {
    const std::string text = std::string(kHeader) + "1514764800,ten,11,9,10,1\n";
    CHECK_THROWS_WITH_AS(parse_csv(text, "X", "x.csv"), doctest::Contains("malformed"), DataError);
  }
  SUBCASE("duplicate timestamp") {
    const std::string text = std::string(kHeader) + "1514764800,10,11,9,10,1\n1514764800,10,11,9,10,1\n";
    CHECK_THROWS_AS(parse_csv(text, "X"), DataError);
  }
  SUBCASE("negative volume") {
    CHECK_THROWS_AS(validate_bar({0, 1, 1, 1, 1, -1}), DataError);
  }
}

TEST_CASE("align_and_fill") {
  SUBCASE("aligned series are unchanged") {
    const auto a = random_series(10, 1), b = random_series(10, 2);
    const auto out = align_and_fill({a, b});
    REQUIRE(out.size() == 2);
    REQUIRE(out[0].size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(out[0].bars[i].close == a.bars[i].close);
      CHECK(out[1].bars[i].close == b.bars[i].close);
    }
  }
  SUBCASE("a missing hour is forward-filled from the previous close with zero volume") {
    const auto a = random_series(10, 1);
    auto b = random_series(10, 2);
    const double prev_close = b.bars[4].close;
    b.bars.erase(b.bars.begin() + 5);
    const auto out = align_and_fill({a, b});
    REQUIRE(out[1].size() == 10);
    const auto& filled = out[1].bars[5];
    CHECK(filled.timestamp == a.bars[5].timestamp);
    CHECK(filled.open == prev_close);
    CHECK(filled.high == prev_close);
    CHECK(filled.low == prev_close);
    CHECK(filled.close == prev_close);
    CHECK(filled.volume == 0.0);
    for (std::size_t i = 0; i < 10; ++i) CHECK(out[0].bars[i].timestamp == out[1].bars[i].timestamp);
  }
  SUBCASE("ranges are trimmed to the common span") {
    const auto a = random_series(20, 1);
    const auto b = random_series(10, 2, 100.0, 0.02, a.bars[5].timestamp);
    const auto out = align_and_fill({a, b});
    CHECK(out[0].size() == 10);
    CHECK(out[0].bars.front().timestamp == a.bars[5].timestamp);
    CHECK(out[1].bars.back().timestamp == out[0].bars.back().timestamp);
  }
  SUBCASE("disjoint ranges are an error") {
    const auto a = random_series(10, 1);
    const auto b = random_series(10, 2, 100.0, 0.02, a.bars.back().timestamp + 5 * kHour);
    CHECK_THROWS_AS(align_and_fill({a, b}), DataError);
  }
}

TEST_CASE("pct_change") {
  AssetSeries s;
  s.bars.push_back({0, 100, 100, 100, 100, 0});
  s.bars.push_back({kHour, 110, 110, 110, 110, 5});
  const auto ch = pct_change(s);
  REQUIRE(ch.size() == 1);
  CHECK(ch[0][3] == doctest::Approx(0.10).epsilon(1e-15));
  CHECK(ch[0][4] == 0.0);  // zero previous volume

  const auto flat = pct_change(constant_series(5, 7.0));
  for (const auto& row : flat)
    for (double v : row) CHECK(v == 0.0);

  CHECK_THROWS_AS(pct_change(constant_series(1, 7.0)), DataError);
}

TEST_CASE("sma examples and brute-force oracle") {
  const std::vector<double> c5(40, 5.0);
  const auto s = ind::sma(c5, 30);
  for (std::size_t t = 29; t < s.size(); ++t) CHECK(s[t] == 5.0);

  const auto small = ind::sma(std::vector<double>{1, 2, 3}, 2);
  CHECK(std::isnan(small[0]));
  CHECK(small[1] == 1.5);
  CHECK(small[2] == 2.5);

  const auto c = random_series(100, 7).closes();
  check_close(ind::sma(c, 30), oracle::sma(c, 30), 1e-12);
  CHECK_THROWS_AS(ind::sma(c, 0), DataError);
}

TEST_CASE("rsi examples and Wilder oracle") {
  std::vector<double> up(40);
  for (std::size_t i = 0; i < up.size(); ++i) up[i] = 100.0 + static_cast<double>(i);
  const auto r_up = ind::rsi(up, 14);
  for (std::size_t t = 14; t < up.size(); ++t) CHECK(r_up[t] == 100.0);

  const auto r_flat = ind::rsi(std::vector<double>(40, 3.0), 14);
  for (std::size_t t = 14; t < 40; ++t) CHECK(r_flat[t] == 50.0);

  const auto c = random_series(50, 11).closes();
  check_close(ind::rsi(c, 14), oracle::rsi(c, 14), 1e-9);
}

TEST_CASE("cci examples and direct-formula oracle") {
  const std::vector<double> flat(40, 9.0);
  const auto z = ind::cci(flat, flat, flat, 20);
  for (std::size_t t = 19; t < 40; ++t) CHECK(z[t] == 0.0);

  // Nine 11s, nine 9s and two 10s: the window mean is 10, which is also the last TP.
  std::vector<double> bal(5, 10.0);
  for (int i = 0; i < 9; ++i) {
    bal.push_back(11.0);
    bal.push_back(9.0);
  }
  bal.push_back(10.0);
  bal.push_back(10.0);
  const auto cb = ind::cci(bal, bal, bal, 20);
  CHECK(std::abs(cb.back()) < 1e-12);

  const auto s = random_series(60, 13);
  const auto h = s.highs(), l = s.lows(), c = s.closes();
  check_close(ind::cci(h, l, c, 20), oracle::cci(h, l, c, 20), 1e-9);
}

TEST_CASE("macd examples and EMA oracle") {
  const auto m_flat = ind::macd(std::vector<double>(60, 4.0));
  for (double v : m_flat) CHECK(v == 0.0);

  std::vector<double> up(60);
  for (std::size_t i = 0; i < up.size(); ++i) up[i] = 50.0 + 0.5 * static_cast<double>(i);
  const auto m_up = ind::macd(up);
  for (std::size_t t = 1; t < up.size(); ++t) CHECK(m_up[t] > 0.0);

  const auto c = random_series(100, 17).closes();
  check_close(ind::ema(c, 12), oracle::ema(c, 12), 1e-9);
  check_close(ind::macd(c), oracle::macd(c, 12, 26), 1e-9);
}

TEST_CASE("atr examples and Wilder oracle") {
  const std::vector<double> flat(40, 2.0);
  const auto a = ind::atr(flat, flat, flat, 14);
  for (std::size_t t = 14; t < 40; ++t) CHECK(a[t] == 0.0);

  // One bar with range 2 inside the seed window, flat everywhere else.
  std::vector<double> h(40, 10.0), l(40, 10.0), c(40, 10.0);
  h[5] = 11.0;
  l[5] = 9.0;
  const auto spike = ind::atr(h, l, c, 14);
  // Only TR_5 = 2 is nonzero, so the seed at t = 14 is 2 / 14 and later values decay.
  CHECK(spike[14] == doctest::Approx(2.0 / 14.0).epsilon(1e-14));
  for (std::size_t t = 15; t < 40; ++t) CHECK(spike[t] == doctest::Approx(spike[t - 1] * 13.0 / 14.0).epsilon(1e-13));

  const auto s = random_series(120, 19);
  check_close(ind::atr(s.highs(), s.lows(), s.closes(), 14),
              oracle::atr(s.highs(), s.lows(), s.closes(), 14), 1e-9);
}

TEST_CASE("adx examples and Wilder oracle") {
  const std::vector<double> flat(60, 2.0);
  const auto z = ind::adx(flat, flat, flat, 14);
  for (std::size_t t = 27; t < 60; ++t) CHECK(z[t] == 0.0);

  std::vector<double> h(80), l(80), c(80);
  for (std::size_t i = 0; i < 80; ++i) {
    c[i] = 100.0 * std::pow(1.01, static_cast<double>(i));
    h[i] = c[i] * 1.002;
    l[i] = c[i] * 0.995;
  }
  const auto trend = ind::adx(h, l, c, 14);
  for (std::size_t t = 27; t < 80; ++t) CHECK(trend[t] > 25.0);

  const auto s = random_series(200, 23);
  check_close(ind::adx(s.highs(), s.lows(), s.closes(), 14),
              oracle::adx(s.highs(), s.lows(), s.closes(), 14), 1e-6);
}

TEST_CASE("rsi and adx stay in [0, 100] and atr >= 0 on fuzzed series") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto s = random_series(80, 1000 + seed, 50.0, 0.05 * (1 + seed % 4));
    const auto r = ind::rsi(s.closes(), 14);
    const auto a = ind::adx(s.highs(), s.lows(), s.closes(), 14);
    const auto t = ind::atr(s.highs(), s.lows(), s.closes(), 14);
    for (std::size_t i = 27; i < 80; ++i) {
      REQUIRE(r[i] >= 0.0);
      REQUIRE(r[i] <= 100.0);
      REQUIRE(a[i] >= 0.0);
      REQUIRE(a[i] <= 100.0);
      REQUIRE(t[i] >= 0.0);
    }
  }
}

TEST_CASE("build_features layout, warm-up and asset count") {
  std::vector<AssetSeries> assets;
  for (int i = 0; i < 5; ++i) assets.push_back(random_series(300, 40 + i));
  const auto fm = build_features(assets);
  CHECK(fm.cols() == 60);
  CHECK(fm.rows() == 300 - 60);
  CHECK(fm.timestamps.front() == assets[0].bars[60].timestamp);
  CHECK(fm.close(0, 2) == assets[2].bars[60].close);
  CHECK(fm.column_names()[12 + kRsi] == assets[1].asset_id + ".rsi");
  for (double v : fm.values) CHECK(std::isfinite(v));

  const auto c = assets[3].closes();
  const auto r = ind::rsi(c, 14);
  CHECK(fm.row(10)[3 * 12 + kRsi] == r[70]);

  std::vector<AssetSeries> four(assets.begin(), assets.begin() + 4);
  CHECK_THROWS_AS(build_features(four), DataError);
  IndicatorConfig any;
  any.expected_assets = 0;
  CHECK(build_features(four, any).cols() == 48);
}

TEST_CASE("build_features on constant prices") {
  std::vector<AssetSeries> assets(5, constant_series(120, 42.0));
  const auto fm = build_features(assets);
  for (std::size_t r = 0; r < fm.rows(); ++r)
    for (std::size_t c = 0; c < fm.cols(); ++c) {
      const auto kind = c % kFeaturesPerAsset;
      const double v = fm.row(r)[c];
      if (kind == kRsi)
        CHECK(v == 50.0);
      else if (kind == kSmaShort || kind == kSmaLong)
        CHECK(v == 42.0);  // a moving average of a price is that price
      else
        CHECK(v == 0.0);
    }
  // After normalization the SMA columns have zero spread and pass through as 0, RSI 50 maps
  // to 0 and ADX 0 maps to -0.5.
  const auto norm = fit_apply_norm(fm, fm.timestamps.front(), fm.timestamps.back() + kHour);
  CHECK(norm.stats.zero_std_count() == 5 * 10);
  for (std::size_t c = 0; c < norm.matrix.cols(); ++c)
    CHECK(norm.matrix.row(7)[c] == (c % kFeaturesPerAsset == kAdx ? -0.5 : 0.0));
}

TEST_CASE("build_features serial and parallel paths are bit-identical") {
  std::vector<AssetSeries> assets;
  for (int i = 0; i < 5; ++i) assets.push_back(random_series(500, 90 + i));
  const auto a = build_features(assets, {}, Exec::Serial);
  const auto b = build_features(assets, {}, Exec::Parallel);
  const auto c = build_features(assets, {}, Exec::Parallel);
  CHECK(a.values == b.values);
  CHECK(b.values == c.values);
  CHECK(a.closes == b.closes);
}

TEST_CASE("normalization") {
  FeatureMatrix fm;
  fm.asset_ids = {"A"};
  for (int r = 0; r < 4; ++r) fm.timestamps.push_back(r * kHour);
  fm.values.assign(4 * 12, 0.0);
  fm.closes.assign(4, 1.0);
  // Column 0 has training values 1 and 5 (mean 3, std 2); row 2 holds 5.
  fm.row(0)[0] = 1.0;
  fm.row(1)[0] = 5.0;
  fm.row(2)[0] = 5.0;
  fm.row(3)[0] = -100.0;  // outside the fit range
  fm.row(2)[kRsi] = 100.0;
  fm.row(3)[kRsi] = 0.0;
  fm.row(0)[kAdx] = 30.0;

  const auto n = fit_apply_norm(fm, 0, 2 * kHour);
  CHECK(n.stats.columns[0].mean == 3.0);
  CHECK(n.stats.columns[0].std == 2.0);
  CHECK(n.matrix.row(2)[0] == 1.0);
  CHECK(n.matrix.row(2)[kRsi] == 0.5);
  CHECK(n.matrix.row(3)[kRsi] == -0.5);
  CHECK(n.matrix.row(0)[kAdx] == doctest::Approx(-0.2));
  CHECK(n.stats.columns[1].zero_std);
  CHECK(n.matrix.row(3)[1] == 0.0);
  CHECK_THROWS_AS(fit_norm(fm, 10 * kHour, 20 * kHour), DataError);
}

TEST_CASE("normalization stats ignore rows outside the fit range") {
  std::vector<AssetSeries> assets;
  for (int i = 0; i < 5; ++i) assets.push_back(random_series(400, 60 + i));
  const auto fm = build_features(assets);
  const EpochSeconds begin = fm.timestamps[50], end = fm.timestamps[250];
  const auto base = fit_norm(fm, begin, end);

  cryptoens::Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto perturbed = fm;
    const std::size_t r = rng.uniform() < 0.5 ? rng.index(50) : 250 + rng.index(fm.rows() - 250);
    for (double& v : perturbed.row(r)) v += 1000.0 * rng.normal();
    const auto again = fit_norm(perturbed, begin, end);
    for (std::size_t c = 0; c < fm.cols(); ++c) {
      REQUIRE(again.columns[c].mean == base.columns[c].mean);
      REQUIRE(again.columns[c].std == base.columns[c].std);
    }
  }
}
