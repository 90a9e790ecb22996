#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace cryptoens {

using EpochSeconds = std::int64_t;
inline constexpr EpochSeconds kHour = 3600;
inline constexpr EpochSeconds kDay = 24 * kHour;
inline constexpr EpochSeconds kWeek = 7 * kDay;

/// Parses Unix seconds ("1530403200") or ISO-8601 ("2018-07-01", "2018-07-01T00:00:00Z",
/// "2018-07-01 00:00:00"). Throws std::invalid_argument on malformed input.
EpochSeconds parse_timestamp(std::string_view text);

/// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_timestamp(EpochSeconds t);

/// Midnight UTC of the given calendar date.
EpochSeconds date_to_epoch(int year, unsigned month, unsigned day);

/// Shifts a midnight-aligned month start by whole calendar months (negative allowed).
EpochSeconds add_months(EpochSeconds month_start, int months);

/// True if t is 00:00 UTC on the 1st of a month.
bool is_month_start(EpochSeconds t);

}  // namespace cryptoens
