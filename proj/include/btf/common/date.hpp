#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace btf {

struct MonthKey {
  int year = 1970;
  int month = 1;

  MonthKey next() const noexcept;
  int days() const noexcept;
  std::string str() const;  // "YYYY-MM"

  auto operator<=>(const MonthKey&) const = default;
};

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  static bool is_valid(int year, int month, int day) noexcept;
  // Throws InputError on anything but a valid "YYYY-MM-DD".
  static Date parse(std::string_view text);

  MonthKey month_key() const noexcept { return {year, month}; }
  int days_in_month() const noexcept { return month_key().days(); }
  std::string str() const;

  auto operator<=>(const Date&) const = default;
};

bool is_leap_year(int year) noexcept;
int days_in_month(int year, int month) noexcept;

}  // namespace btf
