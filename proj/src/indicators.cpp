#include "cryptoens/indicators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cryptoens/errors.hpp"

namespace cryptoens::indicators {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require(bool ok, const char* what) {
  if (!ok) throw DataError(what);
}

void require_same_length(std::span<const double> a, std::span<const double> b,
                         std::span<const double> c) {
  require(a.size() == b.size() && b.size() == c.size(), "indicator inputs differ in length");
}

// Wilder smoothing of x[1..], first value at t = p.
std::vector<double> wilder(std::span<const double> x, std::size_t p) {
  std::vector<double> out(x.size(), kNaN);
  if (x.size() <= p) return out;
  double avg = 0.0;
  for (std::size_t i = 1; i <= p; ++i) avg += x[i];
  avg /= static_cast<double>(p);
  out[p] = avg;
  const double pd = static_cast<double>(p);
  for (std::size_t t = p + 1; t < x.size(); ++t) {
    avg = (avg * (pd - 1.0) + x[t]) / pd;
    out[t] = avg;
  }
  return out;
}

}  // namespace

std::vector<double> sma(std::span<const double> x, std::size_t p) {
  require(p >= 1, "sma: window must be >= 1");
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
  std::vector<double> out(x.size(), kNaN);
  const std::ptrdiff_t first = static_cast<std::ptrdiff_t>(p) - 1;
  // Each window summed directly: no drift from a running sum, trivially parallel.
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::ptrdiff_t t = first; t < n; ++t) {
    double s = 0.0;
    for (std::ptrdiff_t i = t - first; i <= t; ++i) s += x[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(t)] = s / static_cast<double>(p);
  }
  return out;
}

std::vector<double> rsi(std::span<const double> close, std::size_t p) {
  require(p >= 1, "rsi: window must be >= 1");
  require(close.size() > p, "rsi: series not longer than window");
  std::vector<double> gain(close.size(), 0.0), loss(close.size(), 0.0);
  for (std::size_t t = 1; t < close.size(); ++t) {
    const double d = close[t] - close[t - 1];
    gain[t] = d > 0 ? d : 0.0;
    loss[t] = d < 0 ? -d : 0.0;
  }
  const auto avg_gain = wilder(gain, p);
  const auto avg_loss = wilder(loss, p);
  std::vector<double> out(close.size(), kNaN);
  for (std::size_t t = p; t < close.size(); ++t) {
    const double g = avg_gain[t], l = avg_loss[t];
    if (g == 0.0 && l == 0.0)
      out[t] = 50.0;
    else if (l == 0.0)
      out[t] = 100.0;
    else
      out[t] = 100.0 - 100.0 / (1.0 + g / l);
  }
  return out;
}

std::vector<double> cci(std::span<const double> high, std::span<const double> low,
                        std::span<const double> close, std::size_t p) {
  require_same_length(high, low, close);
  require(p >= 1, "cci: window must be >= 1");
  require(close.size() > p, "cci: series not longer than window");
  const std::size_t n = close.size();
  std::vector<double> tp(n);
  for (std::size_t t = 0; t < n; ++t) tp[t] = (high[t] + low[t] + close[t]) / 3.0;
  std::vector<double> out(n, kNaN);
  const std::ptrdiff_t first = static_cast<std::ptrdiff_t>(p) - 1;
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::ptrdiff_t ti = first; ti < static_cast<std::ptrdiff_t>(n); ++ti) {
    const auto t = static_cast<std::size_t>(ti);
    const std::size_t lo = t + 1 - p;
    double mean = 0.0;
    for (std::size_t i = lo; i <= t; ++i) mean += tp[i];
    mean /= static_cast<double>(p);
    double dev = 0.0;
    for (std::size_t i = lo; i <= t; ++i) dev += std::abs(tp[i] - mean);
    dev /= static_cast<double>(p);
    // Rounding in `mean` leaves a residue of a few ulps on a flat window; treat that as zero.
    const double scale = std::max(1.0, std::abs(mean));
    out[t] = dev <= 1e-12 * scale ? 0.0 : (tp[t] - mean) / (0.015 * dev);
  }
  return out;
}

std::vector<double> ema(std::span<const double> x, std::size_t n) {
  require(n >= 1, "ema: span must be >= 1");
  std::vector<double> out(x.size());
  if (x.empty()) return out;
  const double k = 2.0 / (static_cast<double>(n) + 1.0);
  out[0] = x[0];
  for (std::size_t t = 1; t < x.size(); ++t) out[t] = out[t - 1] + k * (x[t] - out[t - 1]);
  return out;
}

std::vector<double> macd(std::span<const double> close, std::size_t fast, std::size_t slow) {
  require(fast < slow, "macd: fast span must be shorter than slow span");
  require(close.size() > slow, "macd: series not longer than slow span");
  const auto f = ema(close, fast);
  const auto s = ema(close, slow);
  std::vector<double> out(close.size());
  for (std::size_t t = 0; t < close.size(); ++t) out[t] = f[t] - s[t];
  return out;
}

std::vector<double> true_range(std::span<const double> high, std::span<const double> low,
                               std::span<const double> close) {
  require_same_length(high, low, close);
  std::vector<double> tr(close.size());
  if (close.empty()) return tr;
  tr[0] = high[0] - low[0];
  for (std::size_t t = 1; t < close.size(); ++t) {
    tr[t] = std::max({high[t] - low[t], std::abs(high[t] - close[t - 1]),
                      std::abs(low[t] - close[t - 1])});
  }
  return tr;
}

std::vector<double> atr(std::span<const double> high, std::span<const double> low,
                        std::span<const double> close, std::size_t p) {
  require(p >= 1, "atr: window must be >= 1");
  require(close.size() > p, "atr: series not longer than window");
  return wilder(true_range(high, low, close), p);
}

std::vector<double> adx(std::span<const double> high, std::span<const double> low,
                        std::span<const double> close, std::size_t p) {
  require_same_length(high, low, close);
  require(p >= 1, "adx: window must be >= 1");
  require(close.size() > 2 * p, "adx: series not longer than twice the window");
  const std::size_t n = close.size();
  std::vector<double> plus_dm(n, 0.0), minus_dm(n, 0.0);
  for (std::size_t t = 1; t < n; ++t) {
    const double up = high[t] - high[t - 1];
    const double down = low[t - 1] - low[t];
    plus_dm[t] = (up > down && up > 0) ? up : 0.0;
    minus_dm[t] = (down > up && down > 0) ? down : 0.0;
  }
  const auto tr_s = wilder(true_range(high, low, close), p);
  const auto plus_s = wilder(plus_dm, p);
  const auto minus_s = wilder(minus_dm, p);

  std::vector<double> dx(n, kNaN);
  for (std::size_t t = p; t < n; ++t) {
    double plus_di = 0.0, minus_di = 0.0;
    if (tr_s[t] > 0.0) {
      plus_di = 100.0 * plus_s[t] / tr_s[t];
      minus_di = 100.0 * minus_s[t] / tr_s[t];
    }
    const double sum = plus_di + minus_di;
    dx[t] = sum > 0.0 ? 100.0 * std::abs(plus_di - minus_di) / sum : 0.0;
  }

  std::vector<double> out(n, kNaN);
  const std::size_t first = 2 * p - 1;
  double avg = 0.0;
  for (std::size_t t = p; t <= first; ++t) avg += dx[t];
  avg /= static_cast<double>(p);
  out[first] = avg;
  const double pd = static_cast<double>(p);
  for (std::size_t t = first + 1; t < n; ++t) {
    avg = (avg * (pd - 1.0) + dx[t]) / pd;
    out[t] = avg;
  }
  return out;
}

}  // namespace cryptoens::indicators
