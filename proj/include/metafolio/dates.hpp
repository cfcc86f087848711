// Calendar date handling for daily price panels.
#pragma once

#include <compare>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace metafolio {

/// A calendar date (no time component). Parsed from / formatted as
/// ISO-8601 `YYYY-MM-DD`.
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    auto operator<=>(const Date&) const = default;

    static Date parse(const std::string& s) {
        if (s.size() != 10 || s[4] != '-' || s[7] != '-')
            throw std::runtime_error("invalid date: " + s);
        Date d;
        try {
            d.year = std::stoi(s.substr(0, 4));
            d.month = std::stoi(s.substr(5, 2));
            d.day = std::stoi(s.substr(8, 2));
        } catch (const std::exception&) {
            throw std::runtime_error("invalid date: " + s);
        }
        if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31)
            throw std::runtime_error("invalid date: " + s);
        return d;
    }

    std::string to_string() const {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
        return buf;
    }

    /// Next calendar day (Gregorian). Used by the synthetic generator;
    /// weekends are not modelled.
    Date next() const {
        static const int mdays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
        int dm = mdays[month - 1];
        bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
        if (month == 2 && leap) dm = 29;
        Date n = *this;
        if (++n.day > dm) {
            n.day = 1;
            if (++n.month > 12) {
                n.month = 1;
                ++n.year;
            }
        }
        return n;
    }
};

}  // namespace metafolio
