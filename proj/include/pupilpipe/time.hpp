#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace pupilpipe {

/// Calendar date on the participant's local clock. All epoch and window
/// arithmetic happens in civil time; timezone handling is out of scope.
struct CivilDate {
  int year = 1970;
  int month = 1;  // 1-12
  int day = 1;    // 1-31

  bool valid() const;
  std::int64_t to_days() const;  // days since 1970-01-01
  static CivilDate from_days(std::int64_t days);
  CivilDate plus_days(int n) const { return from_days(to_days() + n); }

  static std::optional<CivilDate> parse(std::string_view text);  // "YYYY-MM-DD"
  std::string to_string() const;

  auto operator<=>(const CivilDate&) const = default;
};

/// Second-resolution civil date-time, "YYYY-MM-DDTHH:MM:SS" on the wire.
struct CivilDateTime {
  int year = 1970;
  int month = 1;
  int day = 1;
  int hour = 0;
  int minute = 0;
  int second = 0;

  bool valid() const;
  std::int64_t to_seconds() const;
  static CivilDateTime from_seconds(std::int64_t seconds);
  CivilDate date() const { return {year, month, day}; }
  int second_of_day() const { return hour * 3600 + minute * 60 + second; }

  static std::optional<CivilDateTime> parse(std::string_view text);
  std::string to_string() const;

  auto operator<=>(const CivilDateTime&) const = default;
};

int days_in_month(int year, int month);

}  // namespace pupilpipe
