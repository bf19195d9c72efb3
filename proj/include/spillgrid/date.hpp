#pragma once

// Day-serial dates. Serial 0 is 1899-12-30, so serials agree with the civil
// calendar everywhere from 1900-03-01 on and there is no 1900-02-29.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace spillgrid {

struct CivilDate {
  int32_t year = 1900;
  uint32_t month = 1;  // 1..12
  uint32_t day = 1;    // 1..31
  friend bool operator==(const CivilDate&, const CivilDate&) = default;
};

namespace detail {

// Howard Hinnant's civil-from-days / days-from-civil, days since 1970-01-01.
inline constexpr int64_t days_from_civil(int32_t y, uint32_t m, uint32_t d) {
  y -= m <= 2;
  const int64_t era = (y >= 0 ? y : y - 399) / 400;
  const uint32_t yoe = static_cast<uint32_t>(y - era * 400);
  const uint32_t doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const uint32_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

inline constexpr CivilDate civil_from_days(int64_t z) {
  z += 719468;
  const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const uint32_t doe = static_cast<uint32_t>(z - era * 146097);
  const uint32_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int64_t y = static_cast<int64_t>(yoe) + era * 400;
  const uint32_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const uint32_t mp = (5 * doy + 2) / 153;
  const uint32_t d = doy - (153 * mp + 2) / 5 + 1;
  const uint32_t m = mp + (mp < 10 ? 3 : -9);
  return CivilDate{static_cast<int32_t>(y + (m <= 2)), m, d};
}

inline constexpr int64_t kEpochDays = days_from_civil(1899, 12, 30);

}  // namespace detail

inline constexpr bool is_leap_year(int32_t y) {
  return y % 4 == 0 && (y % 100 != 0 || y % 400 == 0);
}

inline constexpr uint32_t days_in_month(int32_t y, uint32_t m) {
  constexpr uint32_t lengths[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && is_leap_year(y)) return 29;
  return lengths[m - 1];
}

inline constexpr bool is_valid_date(int32_t y, uint32_t m, uint32_t d) {
  return m >= 1 && m <= 12 && d >= 1 && d <= days_in_month(y, m);
}

inline constexpr int64_t serial_from_civil(int32_t y, uint32_t m, uint32_t d) {
  return detail::days_from_civil(y, m, d) - detail::kEpochDays;
}

inline constexpr CivilDate civil_from_serial(int64_t serial) {
  return detail::civil_from_days(serial + detail::kEpochDays);
}

// Strict YYYY-MM-DD; anything else is not a date literal.
inline std::optional<int64_t> parse_iso_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  for (size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
    if (s[i] < '0' || s[i] > '9') return std::nullopt;
  auto num = [&](size_t pos, size_t n) {
    int v = 0;
    for (size_t i = 0; i < n; ++i) v = v * 10 + (s[pos + i] - '0');
    return v;
  };
  int y = num(0, 4);
  uint32_t m = static_cast<uint32_t>(num(5, 2));
  uint32_t d = static_cast<uint32_t>(num(8, 2));
  if (!is_valid_date(y, m, d)) return std::nullopt;
  return serial_from_civil(y, m, d);
}

inline std::string format_iso_date(int64_t serial) {
  CivilDate c = civil_from_serial(serial);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", c.year, c.month, c.day);
  return std::string(buf);
}

}  // namespace spillgrid
