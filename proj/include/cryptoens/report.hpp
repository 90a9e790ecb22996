#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "cryptoens/backtester.hpp"

namespace cryptoens::report {

struct ReportContext {
  std::string config_hash;
  std::uint64_t seed = 0;
  bool greedy = false;
  EpochSeconds test_begin = 0;
  double initial_balance = 1'000'000.0;
};

nlohmann::json report_json(const backtest::BacktestReport& rep, const backtest::Schedule& schedule,
                           const ReportContext& ctx);

/// report.json, weekly_returns.csv, quantiles.csv, ecdf.csv, histogram.csv, cumulative.csv.
void write_report_files(const std::filesystem::path& dir, const backtest::BacktestReport& rep,
                        const backtest::Schedule& schedule, const ReportContext& ctx);

/// Reads report.json (and cumulative.csv), prints the summary tables to `out`, and writes
/// tables.txt plus cumulative.svg, ecdf.svg and histogram.svg. Throws DataError on a
/// malformed report.
void render_report(const std::filesystem::path& dir, std::ostream& out);

/// Validates the documented report.json layout; throws DataError naming the first problem.
void check_report_schema(const nlohmann::json& j);

}  // namespace cryptoens::report
