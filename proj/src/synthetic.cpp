#include "cryptoens/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "cryptoens/errors.hpp"
#include "cryptoens/rng.hpp"

namespace cryptoens::synth {

SyntheticSpec default_spec(EpochSeconds begin, EpochSeconds end, std::uint64_t seed) {
  SyntheticSpec s;
  s.begin = begin;
  s.end = end;
  s.seed = seed;
  s.assets = {{"XBT", 15000.0, 2e-5, 0.008},
              {"ETH", 800.0, 2e-5, 0.010},
              {"BCH", 1500.0, -1e-5, 0.012},
              {"XRP", 1.2, 0.0, 0.012},
              {"LTC", 200.0, 0.0, 0.011}};
  return s;
}

std::vector<market::AssetSeries> generate(const SyntheticSpec& spec) {
  if (spec.end <= spec.begin || spec.begin % kHour != 0 || spec.end % kHour != 0)
    throw ConfigError("synthetic range must be non-empty and hour-aligned");
  const auto hours = static_cast<std::size_t>((spec.end - spec.begin) / kHour);
  std::vector<market::AssetSeries> out;
  for (std::size_t a = 0; a < spec.assets.size(); ++a) {
    const auto& m = spec.assets[a];
    if (!(m.start_price > 0) || m.volatility < 0) throw ConfigError("bad synthetic asset model " + m.id);
    Rng rng(derive_seed(spec.seed, {a}));
    market::AssetSeries s;
    s.asset_id = m.id;
    s.bars.reserve(hours);
    double close = m.start_price;
    for (std::size_t h = 0; h < hours; ++h) {
      market::OhlcvBar b;
      b.timestamp = spec.begin + static_cast<EpochSeconds>(h) * kHour;
      b.open = close;
      close = b.open * std::exp(m.drift + m.volatility * rng.normal());
      b.close = close;
      const double wick = 0.5 * m.volatility;
      b.high = std::max(b.open, b.close) * (1.0 + wick * std::abs(rng.normal()));
      b.low = std::min(b.open, b.close) * (1.0 - std::min(0.5, wick * std::abs(rng.normal())));
      b.volume = 100.0 * std::exp(0.5 * rng.normal());
      s.bars.push_back(b);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string to_csv(const market::AssetSeries& series) {
  std::string out = "timestamp,open,high,low,close,volume\n";
  char line[256];
  for (const auto& b : series.bars) {
    std::snprintf(line, sizeof line, "%lld,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(b.timestamp), b.open, b.high, b.low, b.close, b.volume);
    out += line;
  }
  return out;
}

void write_csvs(const std::vector<market::AssetSeries>& series, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& s : series) {
    std::ofstream f(dir / (s.asset_id + ".csv"), std::ios::binary | std::ios::trunc);
    f << to_csv(s);
    if (!f) throw DataError("cannot write " + (dir / (s.asset_id + ".csv")).string());
  }
}

}  // namespace cryptoens::synth
