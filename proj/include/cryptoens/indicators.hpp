#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Technical indicators over hourly bars. Every function returns a series the same length
// as its input, with quiet NaN in the warm-up prefix where the value is undefined.
// RSI, ATR and ADX use Wilder smoothing: avg_t = (avg_{t-1} * (p - 1) + x_t) / p, seeded
// with the plain mean of the first p inputs.
namespace cryptoens::indicators {

/// mean(x[t-p+1..t]); defined from t = p - 1.
std::vector<double> sma(std::span<const double> x, std::size_t p);

/// Defined from t = p. Conventions: no losses -> 100, no gains -> 0, no movement -> 50.
std::vector<double> rsi(std::span<const double> close, std::size_t p = 14);

/// (TP - SMA_p(TP)) / (0.015 * mean |TP - SMA_p(TP)|) with TP = (h + l + c) / 3; defined from
/// t = p - 1. A zero mean deviation yields 0.
std::vector<double> cci(std::span<const double> high, std::span<const double> low,
                        std::span<const double> close, std::size_t p = 20);

/// EMA with multiplier 2 / (n + 1), seeded with x[0]; defined from t = 0.
std::vector<double> ema(std::span<const double> x, std::size_t n);

/// EMA_fast(close) - EMA_slow(close); defined from t = 0.
std::vector<double> macd(std::span<const double> close, std::size_t fast = 12, std::size_t slow = 26);

/// True range; TR_0 = high_0 - low_0.
std::vector<double> true_range(std::span<const double> high, std::span<const double> low,
                               std::span<const double> close);

/// Wilder-smoothed true range over TR_1..; defined from t = p.
std::vector<double> atr(std::span<const double> high, std::span<const double> low,
                        std::span<const double> close, std::size_t p = 14);

/// Wilder ADX; defined from t = 2p - 1. Zero denominators in DI or DX yield 0.
std::vector<double> adx(std::span<const double> high, std::span<const double> low,
                        std::span<const double> close, std::size_t p = 14);

}  // namespace cryptoens::indicators
