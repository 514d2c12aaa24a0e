#pragma once

// UTC calendar arithmetic on epoch seconds (proleptic Gregorian).

#include <chrono>
#include <cstdio>
#include <string>

#include "timescope/core.hpp"

namespace timescope {

enum class TimeUnit { year, month, day, hour, minute };

namespace detail {

inline std::chrono::sys_days to_days(Timestamp ts) {
  // floor division so pre-1970 values land on the correct day
  auto secs = std::chrono::sys_seconds{std::chrono::seconds{ts}};
  return std::chrono::floor<std::chrono::days>(secs);
}

inline Timestamp from_days(std::chrono::sys_days d) {
  return std::chrono::duration_cast<std::chrono::seconds>(d.time_since_epoch()).count();
}

inline Timestamp floor_div(Timestamp value, Timestamp unit) {
  Timestamp q = value / unit;
  if ((value % unit != 0) && ((value < 0) != (unit < 0))) --q;
  return q * unit;
}

}  // namespace detail

/// Start of the unit-aligned interval containing ts.
inline Timestamp truncate(Timestamp ts, TimeUnit unit) {
  using namespace std::chrono;
  switch (unit) {
    case TimeUnit::minute: return detail::floor_div(ts, 60);
    case TimeUnit::hour: return detail::floor_div(ts, 3600);
    case TimeUnit::day: return detail::floor_div(ts, 86400);
    case TimeUnit::month: {
      year_month_day ymd{detail::to_days(ts)};
      return detail::from_days(sys_days{ymd.year() / ymd.month() / 1});
    }
    case TimeUnit::year: {
      year_month_day ymd{detail::to_days(ts)};
      return detail::from_days(sys_days{ymd.year() / January / 1});
    }
  }
  return ts;
}

/// Start of the interval following the aligned interval that begins at `aligned`.
inline Timestamp next_boundary(Timestamp aligned, TimeUnit unit) {
  using namespace std::chrono;
  switch (unit) {
    case TimeUnit::minute: return aligned + 60;
    case TimeUnit::hour: return aligned + 3600;
    case TimeUnit::day: return aligned + 86400;
    case TimeUnit::month: {
      year_month_day ymd{detail::to_days(aligned)};
      year_month ym = ymd.year() / ymd.month() + months{1};
      return detail::from_days(sys_days{ym / 1});
    }
    case TimeUnit::year: {
      year_month_day ymd{detail::to_days(aligned)};
      return detail::from_days(sys_days{(ymd.year() + years{1}) / January / 1});
    }
  }
  return aligned;
}

/// Number of unit-aligned intervals intersecting [start, end].
inline std::uint64_t interval_count(Timestamp start, Timestamp end, TimeUnit unit) {
  using namespace std::chrono;
  const Timestamp a = truncate(start, unit);
  const Timestamp b = truncate(end, unit);
  switch (unit) {
    case TimeUnit::minute: return static_cast<std::uint64_t>((b - a) / 60 + 1);
    case TimeUnit::hour: return static_cast<std::uint64_t>((b - a) / 3600 + 1);
    case TimeUnit::day: return static_cast<std::uint64_t>((b - a) / 86400 + 1);
    case TimeUnit::month: {
      year_month_day ya{detail::to_days(a)};
      year_month_day yb{detail::to_days(b)};
      auto diff = (int(yb.year()) - int(ya.year())) * 12 +
                  (int(unsigned(yb.month())) - int(unsigned(ya.month())));
      return static_cast<std::uint64_t>(diff + 1);
    }
    case TimeUnit::year: {
      year_month_day ya{detail::to_days(a)};
      year_month_day yb{detail::to_days(b)};
      return static_cast<std::uint64_t>(int(yb.year()) - int(ya.year()) + 1);
    }
  }
  return 0;
}

/// "YYYY-MM-DD HH:MM:SS" in UTC.
inline std::string format_utc(Timestamp ts) {
  using namespace std::chrono;
  const auto day = detail::to_days(ts);
  const year_month_day ymd{day};
  Timestamp rem = ts - detail::from_days(day);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02lld:%02lld:%02lld", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()), static_cast<long long>(rem / 3600),
                static_cast<long long>((rem / 60) % 60), static_cast<long long>(rem % 60));
  return buf;
}

inline Timestamp utc_timestamp(int y, unsigned mo, unsigned d, int h = 0, int mi = 0, int s = 0) {
  using namespace std::chrono;
  return detail::from_days(sys_days{year{y} / month{mo} / day{d}}) + h * 3600 + mi * 60 + s;
}

}  // namespace timescope
