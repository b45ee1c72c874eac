#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace tempora {

// Calendar date in UTC. Thin value wrapper over std::chrono::sys_days.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::chrono::sys_days days) : days_(days) {}
    constexpr Date(int y, unsigned m, unsigned d)
        : days_(std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m},
                                            std::chrono::day{d}}) {}

    // Accepts "YYYY-MM-DD", optionally followed by a time part ("T..." or " ...").
    static Date parse(std::string_view text);
    static bool valid(std::string_view text) noexcept;

    std::string str() const;

    constexpr std::chrono::sys_days days() const { return days_; }
    constexpr std::int64_t serial() const { return days_.time_since_epoch().count(); }
    std::chrono::year_month_day ymd() const { return std::chrono::year_month_day{days_}; }

    // Calendar month arithmetic; the day is clamped to the end of the target month.
    Date add_months(int months) const;
    Date add_days(int d) const { return Date{days_ + std::chrono::days{d}}; }

    constexpr auto operator<=>(const Date&) const = default;

private:
    std::chrono::sys_days days_{};
};

// Whole calendar months from `from` forward to `to` (from <= to), partial months
// rounded up: the smallest m with from.add_months(m) >= to.
int months_until(Date from, Date to);

// Date of a UTC timestamp given as seconds since the epoch.
Date date_of(std::chrono::system_clock::time_point tp);

// Parses RFC 822 dates as found in RSS ("Tue, 05 Mar 2024 10:00:00 GMT") as well
// as ISO 8601 dates and timestamps. Returns false when the text is not a date.
bool parse_feed_date(std::string_view text, Date& out);

std::string format_timestamp(std::chrono::system_clock::time_point tp);
std::chrono::system_clock::time_point parse_timestamp(std::string_view text);

} // namespace tempora
