#include "tempora/dates.hpp"

#include "tempora/error.hpp"

#include <fmt/format.h>

#include <array>
#include <cctype>
#include <charconv>

namespace tempora {

namespace {

bool parse_int(std::string_view s, int& out) {
    if (s.empty())
        return false;
    for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c)))
            return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

bool parse_iso(std::string_view text, Date& out) {
    if (text.size() < 10 || text[4] != '-' || text[7] != '-')
        return false;
    if (text.size() > 10 && text[10] != 'T' && text[10] != ' ' && text[10] != 't')
        return false;
    int y = 0, m = 0, d = 0;
    if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), m) || !parse_int(text.substr(8, 2), d))
        return false;
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok())
        return false;
    out = Date{std::chrono::sys_days{ymd}};
    return true;
}

} // namespace

Date Date::parse(std::string_view text) {
    Date d;
    if (!parse_iso(text, d))
        throw Error(Errc::Schema, fmt::format("invalid date '{}', expected YYYY-MM-DD", text));
    return d;
}

bool Date::valid(std::string_view text) noexcept {
    Date d;
    return parse_iso(text, d);
}

std::string Date::str() const {
    const auto v = ymd();
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(v.year()), static_cast<unsigned>(v.month()),
                       static_cast<unsigned>(v.day()));
}

Date Date::add_months(int months) const {
    using namespace std::chrono;
    const auto v = ymd();
    const year_month ym = year_month{v.year(), v.month()} + std::chrono::months{months};
    const auto last = year_month_day_last{ym.year(), month_day_last{ym.month()}}.day();
    const auto day = v.day() > last ? last : v.day();
    return Date{sys_days{year_month_day{ym.year(), ym.month(), day}}};
}

int months_until(Date from, Date to) {
    if (to <= from)
        return 0;
    const auto a = from.ymd();
    const auto b = to.ymd();
    int m = (static_cast<int>(b.year()) - static_cast<int>(a.year())) * 12 +
            (static_cast<int>(static_cast<unsigned>(b.month())) - static_cast<int>(static_cast<unsigned>(a.month())));
    if (m < 0)
        m = 0;
    // Adjust to the smallest m with from + m >= to; clamping makes this at most a step either way.
    while (m > 0 && from.add_months(m - 1) >= to)
        --m;
    while (from.add_months(m) < to)
        ++m;
    return m;
}

Date date_of(std::chrono::system_clock::time_point tp) {
    return Date{std::chrono::floor<std::chrono::days>(tp)};
}

bool parse_feed_date(std::string_view text, Date& out) {
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front())))
        text.remove_prefix(1);
    if (parse_iso(text, out))
        return true;
    // RFC 822: [Day, ] DD Mon YYYY ...
    if (auto comma = text.find(','); comma != std::string_view::npos && comma < 5)
        text.remove_prefix(comma + 1);
    while (!text.empty() && text.front() == ' ')
        text.remove_prefix(1);
    const auto sp1 = text.find(' ');
    if (sp1 == std::string_view::npos)
        return false;
    const auto sp2 = text.find(' ', sp1 + 1);
    const auto day_s = text.substr(0, sp1);
    const auto mon_s = text.substr(sp1 + 1, sp2 == std::string_view::npos ? std::string_view::npos : sp2 - sp1 - 1);
    const auto rest = sp2 == std::string_view::npos ? std::string_view{} : text.substr(sp2 + 1);
    const auto year_s = rest.substr(0, rest.find(' '));
    static constexpr std::array<std::string_view, 12> names{"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                            "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
    unsigned mon = 0;
    for (unsigned i = 0; i < names.size(); ++i)
        if (mon_s.substr(0, 3) == names[i])
            mon = i + 1;
    int day = 0, year = 0;
    if (mon == 0 || !parse_int(day_s, day) || !parse_int(year_s, year))
        return false;
    if (year < 100)
        year += 2000;
    const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{mon},
                                          std::chrono::day{static_cast<unsigned>(day)}};
    if (!ymd.ok())
        return false;
    out = Date{std::chrono::sys_days{ymd}};
    return true;
}

std::string format_timestamp(std::chrono::system_clock::time_point tp) {
    using namespace std::chrono;
    const auto secs = floor<seconds>(tp);
    const auto day = floor<days>(secs);
    const hh_mm_ss hms{secs - day};
    return fmt::format("{}T{:02d}:{:02d}:{:02d}Z", Date{day}.str(), hms.hours().count(), hms.minutes().count(),
                       hms.seconds().count());
}

std::chrono::system_clock::time_point parse_timestamp(std::string_view text) {
    const Date d = Date::parse(text);
    std::chrono::system_clock::time_point tp{d.days()};
    if (text.size() >= 19 && (text[10] == 'T' || text[10] == ' ')) {
        int h = 0, m = 0, s = 0;
        if (text[13] != ':' || text[16] != ':' || !parse_int(text.substr(11, 2), h) ||
            !parse_int(text.substr(14, 2), m) || !parse_int(text.substr(17, 2), s))
            throw Error(Errc::Schema, fmt::format("invalid timestamp '{}'", text));
        tp += std::chrono::hours{h} + std::chrono::minutes{m} + std::chrono::seconds{s};
    }
    return tp;
}

} // namespace tempora
