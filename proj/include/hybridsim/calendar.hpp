#pragma once

#include <chrono>
#include <cstdio>
#include <string>

#include "hybridsim/core.hpp"

namespace hybridsim {

enum class DayType { Weekday = 0, Weekend = 1 };

/// Maps simulation day indices onto civil dates. Day 0 is the epoch; the
/// default epoch 2024-01-01 is a Monday.
class Calendar {
public:
    Calendar() : epoch_(std::chrono::year{2024} / std::chrono::January / 1) {}
    explicit Calendar(std::chrono::sys_days epoch) : epoch_(epoch) {}

    /// Parses "YYYY-MM-DD".
    static Calendar from_iso(const std::string& iso) {
        int y = 0;
        unsigned m = 0, d = 0;
        if (std::sscanf(iso.c_str(), "%d-%u-%u", &y, &m, &d) != 3) {
            throw ConfigError("calendar epoch '" + iso + "' is not YYYY-MM-DD");
        }
        std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
        if (!ymd.ok()) throw ConfigError("calendar epoch '" + iso + "' is not a valid date");
        return Calendar(std::chrono::sys_days{ymd});
    }

    std::chrono::sys_days date(long day_index) const { return epoch_ + std::chrono::days{day_index}; }

    DayType day_type(long day_index) const {
        const std::chrono::weekday wd{date(day_index)};
        return (wd == std::chrono::Saturday || wd == std::chrono::Sunday) ? DayType::Weekend : DayType::Weekday;
    }

    /// 0-based week of month: days 1-7 -> 0, 8-14 -> 1, ..., 29-31 -> 4.
    int week_of_month(long day_index) const {
        const std::chrono::year_month_day ymd{date(day_index)};
        return static_cast<int>((static_cast<unsigned>(ymd.day()) - 1) / 7);
    }

    bool is_weekend_minute(long minute_index) const {
        return day_type(floor_div(minute_index, kMinutesPerDay)) == DayType::Weekend;
    }

    std::string epoch_iso() const {
        const std::chrono::year_month_day ymd{epoch_};
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
        return buf;
    }

private:
    static long floor_div(long a, long b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

    std::chrono::sys_days epoch_;
};

}  // namespace hybridsim
