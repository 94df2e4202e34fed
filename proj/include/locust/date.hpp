#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <string>

#include "locust/common.hpp"

namespace locust {

// Calendar date stored as days since 1970-01-01. Cheap to compare and to do
// day arithmetic on, which is all the pipeline ever needs.
class Date {
 public:
  Date() : serial_(0) {}
  explicit Date(std::int64_t serial) : serial_(serial) {}
  Date(int year, unsigned month, unsigned day) {
    std::chrono::year_month_day ymd{std::chrono::year{year},
                                    std::chrono::month{month},
                                    std::chrono::day{day}};
    if (!ymd.ok()) {
      throw Error(ErrorCode::ConfigInvalid, "invalid calendar date");
    }
    serial_ = std::chrono::sys_days{ymd}.time_since_epoch().count();
  }

  static Date parse(const std::string& iso);  // "YYYY-MM-DD"
  std::string to_string() const;

  std::int64_t serial() const { return serial_; }
  Date add_days(std::int64_t n) const { return Date(serial_ + n); }

  auto operator<=>(const Date&) const = default;

 private:
  std::int64_t serial_;
};

struct DateRange {
  Date lo;
  Date hi;  // inclusive
  bool contains(Date d) const { return lo <= d && d <= hi; }
};

}  // namespace locust
