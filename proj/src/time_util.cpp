#include "cryptoens/time_util.hpp"

#include <chrono>
#include <cstdio>
#include <stdexcept>

namespace cryptoens {
namespace {

using namespace std::chrono;

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i)
    if (s[i] < '0' || s[i] > '9') return false;
  return true;
}

}  // namespace

EpochSeconds date_to_epoch(int y, unsigned m, unsigned d) {
  const year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) throw std::invalid_argument("invalid calendar date");
  return sys_days{ymd}.time_since_epoch().count() * kDay;
}

EpochSeconds parse_timestamp(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '"')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '"' || text.back() == '\r'))
    text.remove_suffix(1);
  if (all_digits(text)) {
    const std::string s(text);
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("bad unix timestamp: " + s);
    return v;
  }
  const std::string s(text);
  int y = 0, hh = 0, mm = 0, ss = 0;
  unsigned mo = 0, d = 0;
  int consumed = 0;
  if (std::sscanf(s.c_str(), "%4d-%2u-%2u%n", &y, &mo, &d, &consumed) != 3 || consumed != 10)
    throw std::invalid_argument("bad ISO-8601 timestamp: " + s);
  std::string_view rest = text.substr(10);
  if (!rest.empty()) {
    if (rest[0] != 'T' && rest[0] != ' ') throw std::invalid_argument("bad ISO-8601 timestamp: " + s);
    const std::string tail(rest.substr(1));
    int n = 0;
    if (std::sscanf(tail.c_str(), "%2d:%2d%n", &hh, &mm, &n) != 2)
      throw std::invalid_argument("bad ISO-8601 time: " + s);
    std::string_view more = std::string_view(tail).substr(static_cast<std::size_t>(n));
    if (!more.empty() && more[0] == ':') {
      int n2 = 0;
      const std::string sec(more.substr(1));
      if (std::sscanf(sec.c_str(), "%2d%n", &ss, &n2) != 1)
        throw std::invalid_argument("bad ISO-8601 seconds: " + s);
      more = more.substr(1 + static_cast<std::size_t>(n2));
    }
    if (!more.empty() && more != "Z" && more != "+00:00")
      throw std::invalid_argument("only UTC timestamps are supported: " + s);
    if (hh < 0 || hh > 23 || mm < 0 || mm > 59 || ss < 0 || ss > 59)
      throw std::invalid_argument("time of day out of range: " + s);
  }
  return date_to_epoch(y, mo, d) + hh * kHour + mm * 60 + ss;
}

std::string format_timestamp(EpochSeconds t) {
  const EpochSeconds day_count = (t >= 0) ? t / kDay : -((-t + kDay - 1) / kDay);
  const EpochSeconds secs = t - day_count * kDay;
  const year_month_day ymd{sys_days{days{day_count}}};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()), int(secs / kHour), int(secs % kHour / 60),
                int(secs % 60));
  return buf;
}

EpochSeconds add_months(EpochSeconds month_start, int months_delta) {
  const year_month_day ymd{sys_days{days{month_start / kDay}}};
  const year_month_day shifted = ymd + months{months_delta};
  return sys_days{shifted}.time_since_epoch().count() * kDay + month_start % kDay;
}

bool is_month_start(EpochSeconds t) {
  if (t % kDay != 0) return false;
  const year_month_day ymd{sys_days{days{t / kDay}}};
  return unsigned(ymd.day()) == 1;
}

}  // namespace cryptoens
