#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <string>

#include "error.hpp"

namespace deltabench {

using Date = std::chrono::sys_days;

inline Date make_date(int y, unsigned m, unsigned d) {
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) throw ParameterError("invalid calendar date");
    return Date{ymd};
}

/// Fourth Friday of the given month.
inline Date fourth_friday(int year, unsigned month) {
    using namespace std::chrono;
    year_month_weekday ymw{std::chrono::year{year} / std::chrono::month{month} / Friday[4]};
    if (!ymw.ok()) throw ParameterError("invalid year/month");
    return Date{ymw};
}

inline bool is_weekday(Date d) {
    const unsigned wd = std::chrono::weekday{d}.iso_encoding();
    return wd <= 5;
}

inline std::string format_date(Date d) {
    std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

inline Date parse_date(const std::string& s) {
    int y = 0;
    unsigned m = 0, d = 0;
    char tail = 0;
    if (std::sscanf(s.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3)
        throw InputError("malformed date '" + s + "' (expected YYYY-MM-DD)");
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) throw InputError("invalid date '" + s + "'");
    return Date{ymd};
}

/// Weekday-only calendar (no exchange holidays) mapping trading-day indices
/// onto dates, with index 0 at `start`.
class TradingCalendar {
public:
    explicit TradingCalendar(Date start) : start_(start) {
        if (!is_weekday(start)) throw ParameterError("calendar start must be a weekday");
        offset_ = static_cast<std::int64_t>(std::chrono::weekday{start}.iso_encoding()) - 1;
        monday_ = start - std::chrono::days{offset_};
    }

    Date start() const { return start_; }

    Date date_of(std::int64_t day) const {
        const std::int64_t total = offset_ + day;
        const std::int64_t weeks = floor_div(total, 5);
        const std::int64_t rem = total - weeks * 5;
        return monday_ + std::chrono::days{weeks * 7 + rem};
    }

    /// Index of a weekday date.
    std::int64_t day_of(Date date) const {
        if (!is_weekday(date)) throw ParameterError("day_of: date is not a weekday");
        const std::int64_t n = (date - monday_).count();
        const std::int64_t weeks = floor_div(n, 7);
        const std::int64_t rem = n - weeks * 7;
        return weeks * 5 + rem - offset_;
    }

private:
    static std::int64_t floor_div(std::int64_t a, std::int64_t b) {
        std::int64_t q = a / b;
        if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
        return q;
    }

    Date start_;
    Date monday_;
    std::int64_t offset_ = 0;
};

} // namespace deltabench
