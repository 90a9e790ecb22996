#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cryptoens/market_data.hpp"
#include "cryptoens/time_util.hpp"

namespace cryptoens::synth {

struct AssetModel {
  std::string id;
  double start_price = 100.0;
  double drift = 0.0;       // log-return per hour
  double volatility = 0.01; // std of the hourly log-return
};

struct SyntheticSpec {
  EpochSeconds begin = 0;  // first bar
  EpochSeconds end = 0;    // exclusive
  std::vector<AssetModel> assets;
  std::uint64_t seed = 0;
};

/// Five assets with crypto-like price levels and hourly volatility.
SyntheticSpec default_spec(EpochSeconds begin, EpochSeconds end, std::uint64_t seed);

/// Geometric random walk bars; every bar satisfies the OHLCV invariants.
std::vector<market::AssetSeries> generate(const SyntheticSpec& spec);

/// One "<id>.csv" per asset in `dir`.
void write_csvs(const std::vector<market::AssetSeries>& series, const std::filesystem::path& dir);
std::string to_csv(const market::AssetSeries& series);

}  // namespace cryptoens::synth
