#include "locust/date.hpp"

#include <cstdio>

namespace locust {

Date Date::parse(const std::string& iso) {
  int y = 0;
  unsigned m = 0, d = 0;
  char trail = 0;
  if (std::sscanf(iso.c_str(), "%d-%u-%u%c", &y, &m, &d, &trail) != 3) {
    throw Error(ErrorCode::ConfigInvalid, "unparseable date '" + iso + "'");
  }
  return Date(y, m, d);
}

std::string Date::to_string() const {
  std::chrono::sys_days sd{std::chrono::days{serial_}};
  std::chrono::year_month_day ymd{sd};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()));
  return buf;
}

}  // namespace locust
