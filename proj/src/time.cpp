#include "pupilpipe/time.hpp"

#include <charconv>
#include <cstdio>

namespace pupilpipe {

namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

// Civil-days algorithms after Howard Hinnant's date notes.
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                       static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

CivilDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return {static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

bool parse_fixed_int(std::string_view text, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > text.size()) return false;
  for (std::size_t i = 0; i < len; ++i) {
    const char c = text[pos + i];
    if (c < '0' || c > '9') return false;
  }
  const auto* first = text.data() + pos;
  return std::from_chars(first, first + len, out).ec == std::errc{};
}

}  // namespace

int days_in_month(int year, int month) {
  static constexpr int kDays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month < 1 || month > 12) return 0;
  if (month == 2 && is_leap(year)) return 29;
  return kDays[month - 1];
}

bool CivilDate::valid() const {
  return month >= 1 && month <= 12 && day >= 1 && day <= days_in_month(year, month);
}

std::int64_t CivilDate::to_days() const { return days_from_civil(year, month, day); }

CivilDate CivilDate::from_days(std::int64_t days) { return civil_from_days(days); }

std::optional<CivilDate> CivilDate::parse(std::string_view text) {
  CivilDate d;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  if (!parse_fixed_int(text, 0, 4, d.year) || !parse_fixed_int(text, 5, 2, d.month) ||
      !parse_fixed_int(text, 8, 2, d.day))
    return std::nullopt;
  if (!d.valid()) return std::nullopt;
  return d;
}

std::string CivilDate::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
  return buf;
}

bool CivilDateTime::valid() const {
  return date().valid() && hour >= 0 && hour <= 23 && minute >= 0 && minute <= 59 &&
         second >= 0 && second <= 59;
}

std::int64_t CivilDateTime::to_seconds() const {
  return date().to_days() * 86400 + second_of_day();
}

CivilDateTime CivilDateTime::from_seconds(std::int64_t seconds) {
  std::int64_t days = seconds / 86400;
  std::int64_t rem = seconds % 86400;
  if (rem < 0) {
    rem += 86400;
    days -= 1;
  }
  const CivilDate d = CivilDate::from_days(days);
  return {d.year, d.month, d.day, static_cast<int>(rem / 3600),
          static_cast<int>((rem % 3600) / 60), static_cast<int>(rem % 60)};
}

std::optional<CivilDateTime> CivilDateTime::parse(std::string_view text) {
  if (text.size() != 19 || text[10] != 'T' || text[13] != ':' || text[16] != ':')
    return std::nullopt;
  const auto date = CivilDate::parse(text.substr(0, 10));
  if (!date) return std::nullopt;
  CivilDateTime t{date->year, date->month, date->day, 0, 0, 0};
  if (!parse_fixed_int(text, 11, 2, t.hour) || !parse_fixed_int(text, 14, 2, t.minute) ||
      !parse_fixed_int(text, 17, 2, t.second))
    return std::nullopt;
  if (!t.valid()) return std::nullopt;
  return t;
}

std::string CivilDateTime::to_string() const {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d", year, month, day, hour,
                minute, second);
  return buf;
}

}  // namespace pupilpipe
