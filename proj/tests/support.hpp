#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <unistd.h>

#include "cryptoens/features.hpp"
#include "cryptoens/market_data.hpp"
#include "cryptoens/rng.hpp"
#include "cryptoens/time_util.hpp"

namespace testing_support {

using cryptoens::EpochSeconds;
using cryptoens::kHour;

/// Random-walk OHLCV bars that satisfy every bar invariant.
inline cryptoens::market::AssetSeries random_series(std::size_t n, std::uint64_t seed,
                                                    double start = 100.0, double vol = 0.02,
                                                    EpochSeconds t0 = 1514764800) {
  cryptoens::Rng rng(seed);
  cryptoens::market::AssetSeries s;
  s.asset_id = "A" + std::to_string(seed);
  double prev = start;
  for (std::size_t i = 0; i < n; ++i) {
    cryptoens::market::OhlcvBar b;
    b.timestamp = t0 + static_cast<EpochSeconds>(i) * kHour;
    b.open = prev;
    b.close = prev * std::exp(vol * rng.normal());
    b.high = std::max(b.open, b.close) * (1.0 + vol * rng.uniform());
    b.low = std::min(b.open, b.close) * (1.0 - vol * rng.uniform());
    b.volume = 1000.0 * rng.uniform();
    s.bars.push_back(b);
    prev = b.close;
  }
  return s;
}

/// A feature matrix with the given close prices (rows x assets) and `cols_per_asset` zero
/// feature columns, for environment tests that only care about prices.
inline std::shared_ptr<cryptoens::market::FeatureMatrix> price_matrix(
    const std::vector<std::vector<double>>& closes, EpochSeconds t0 = 1514764800) {
  auto fm = std::make_shared<cryptoens::market::FeatureMatrix>();
  const std::size_t D = closes.front().size();
  for (std::size_t d = 0; d < D; ++d) fm->asset_ids.push_back("X" + std::to_string(d));
  for (std::size_t r = 0; r < closes.size(); ++r) {
    fm->timestamps.push_back(t0 + static_cast<EpochSeconds>(r) * kHour);
    fm->closes.insert(fm->closes.end(), closes[r].begin(), closes[r].end());
  }
  fm->values.assign(fm->rows() * fm->cols(), 0.0);
  return fm;
}

/// Random positive price paths (rows x assets) with feature values drawn at random too.
inline std::shared_ptr<cryptoens::market::FeatureMatrix> random_matrix(std::size_t rows, std::size_t D,
                                                                       std::uint64_t seed) {
  cryptoens::Rng rng(seed);
  std::vector<std::vector<double>> closes(rows, std::vector<double>(D));
  for (std::size_t d = 0; d < D; ++d) {
    double p = 10.0 * std::pow(10.0, static_cast<double>(d % 4));
    for (std::size_t r = 0; r < rows; ++r) {
      p *= std::exp(0.02 * rng.normal());
      closes[r][d] = p;
    }
  }
  auto fm = price_matrix(closes);
  for (double& v : fm->values) v = rng.normal();
  return fm;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("cryptoens_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_support
