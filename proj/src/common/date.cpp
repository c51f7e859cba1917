#include "btf/common/date.hpp"

#include <charconv>
#include <cstdio>

#include "btf/common/error.hpp"

namespace btf {

bool is_leap_year(int year) noexcept {
  return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

int days_in_month(int year, int month) noexcept {
  static constexpr int kDays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month < 1 || month > 12) return 0;
  if (month == 2 && is_leap_year(year)) return 29;
  return kDays[month - 1];
}

MonthKey MonthKey::next() const noexcept {
  return month == 12 ? MonthKey{year + 1, 1} : MonthKey{year, month + 1};
}

int MonthKey::days() const noexcept { return days_in_month(year, month); }

std::string MonthKey::str() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
  return buf;
}

bool Date::is_valid(int year, int month, int day) noexcept {
  return year >= 1 && year <= 9999 && month >= 1 && month <= 12 && day >= 1 &&
         day <= btf::days_in_month(year, month);
}

namespace {

bool parse_fixed(std::string_view s, int& out) {
  for (char c : s) {
    if (c < '0' || c > '9') return false;
  }
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

Date Date::parse(std::string_view text) {
  Date d;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' ||
      !parse_fixed(text.substr(0, 4), d.year) || !parse_fixed(text.substr(5, 2), d.month) ||
      !parse_fixed(text.substr(8, 2), d.day) || !is_valid(d.year, d.month, d.day)) {
    throw InputError("invalid date '" + std::string(text) + "' (expected YYYY-MM-DD)");
  }
  return d;
}

std::string Date::str() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
  return buf;
}

}  // namespace btf
