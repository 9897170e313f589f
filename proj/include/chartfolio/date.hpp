#pragma once

#include <compare>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace chartfolio {

// Calendar date. Serial arithmetic uses the proleptic Gregorian civil-day
// algorithm so dates order and subtract correctly without timezone baggage.
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    auto operator<=>(const Date&) const = default;
};

namespace detail {

// days_from_civil / civil_from_days, Howard Hinnant's algorithms.
inline int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

inline void civil_from_days(int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int64_t yy = static_cast<int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

} // namespace detail

// Days since 1970-01-01.
inline int64_t to_serial(const Date& dt) {
    return detail::days_from_civil(dt.year, dt.month, dt.day);
}

inline Date from_serial(int64_t serial) {
    Date dt;
    detail::civil_from_days(serial, dt.year, dt.month, dt.day);
    return dt;
}

inline bool is_valid_date(const Date& dt) {
    if (dt.month < 1 || dt.month > 12 || dt.day < 1) return false;
    static const int mdays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    int dim = mdays[dt.month - 1];
    const bool leap = (dt.year % 4 == 0 && dt.year % 100 != 0) || dt.year % 400 == 0;
    if (dt.month == 2 && leap) dim = 29;
    return dt.day <= dim;
}

// Parses strict ISO-8601 YYYY-MM-DD.
inline std::optional<Date> parse_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    auto digits = [&](size_t pos, size_t n, int& out) {
        out = 0;
        for (size_t i = pos; i < pos + n; ++i) {
            if (s[i] < '0' || s[i] > '9') return false;
            out = out * 10 + (s[i] - '0');
        }
        return true;
    };
    Date dt;
    if (!digits(0, 4, dt.year) || !digits(5, 2, dt.month) || !digits(8, 2, dt.day))
        return std::nullopt;
    if (!is_valid_date(dt)) return std::nullopt;
    return dt;
}

inline std::string to_string(const Date& dt) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", dt.year, dt.month, dt.day);
    return buf;
}

} // namespace chartfolio
