#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "airdisrupt/errors.hpp"

namespace airdisrupt {

// Calendar date stored as days since 1970-01-01. All timestamps in this
// library are airport-local wall-clock values as provided by the source
// data; no timezone conversion happens anywhere.
class Date {
public:
    Date() = default;

    static Date from_ymd(int year, unsigned month, unsigned day) {
        std::chrono::year_month_day ymd{std::chrono::year{year},
                                        std::chrono::month{month},
                                        std::chrono::day{day}};
        if (!ymd.ok()) {
            char buf[48];
            std::snprintf(buf, sizeof(buf), "invalid calendar date: %04d-%02u-%02u",
                          year, month, day);
            throw DataError(buf);
        }
        return Date{std::chrono::sys_days{ymd}.time_since_epoch().count()};
    }

    // Parse "YYYY-MM-DD".
    static Date parse(std::string_view s) {
        if (s.size() != 10 || s[4] != '-' || s[7] != '-') {
            throw DataError("invalid date (expected YYYY-MM-DD): " + std::string(s));
        }
        for (size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
            if (s[i] < '0' || s[i] > '9') {
                throw DataError("invalid date (expected YYYY-MM-DD): " + std::string(s));
            }
        }
        int y = (s[0] - '0') * 1000 + (s[1] - '0') * 100 + (s[2] - '0') * 10 + (s[3] - '0');
        unsigned m = unsigned((s[5] - '0') * 10 + (s[6] - '0'));
        unsigned d = unsigned((s[8] - '0') * 10 + (s[9] - '0'));
        return from_ymd(y, m, d);
    }

    static Date from_serial(int64_t days_since_epoch) { return Date{days_since_epoch}; }

    int64_t serial() const { return days_; }

    int year() const { return int(ymd().year()); }
    unsigned month() const { return unsigned(ymd().month()); }
    unsigned day() const { return unsigned(ymd().day()); }

    Date next() const { return Date{days_ + 1}; }
    Date plus_days(int64_t n) const { return Date{days_ + n}; }

    std::string to_string() const {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", year(), month(), day());
        return buf;
    }

    auto operator<=>(const Date&) const = default;

private:
    explicit Date(int64_t days) : days_(days) {}

    std::chrono::year_month_day ymd() const {
        return std::chrono::year_month_day{
            std::chrono::sys_days{std::chrono::days{days_}}};
    }

    int64_t days_ = 0;
};

// Local date-time with minute precision, stored as minutes since the
// 1970-01-01T00:00 local epoch.
class DateTime {
public:
    DateTime() = default;

    static DateTime from_parts(Date date, unsigned hour, unsigned minute) {
        return DateTime{date.serial() * 1440 + int64_t(hour) * 60 + minute};
    }

    // Parse "YYYY-MM-DDTHH:MM" (no offset).
    static DateTime parse(std::string_view s) {
        if (s.size() != 16 || s[10] != 'T' || s[13] != ':') {
            throw DataError("invalid date-time (expected YYYY-MM-DDTHH:MM): " +
                            std::string(s));
        }
        Date d = Date::parse(s.substr(0, 10));
        for (size_t i : {11u, 12u, 14u, 15u}) {
            if (s[i] < '0' || s[i] > '9') {
                throw DataError("invalid date-time (expected YYYY-MM-DDTHH:MM): " +
                                std::string(s));
            }
        }
        unsigned hh = unsigned((s[11] - '0') * 10 + (s[12] - '0'));
        unsigned mm = unsigned((s[14] - '0') * 10 + (s[15] - '0'));
        if (hh > 23 || mm > 59) {
            throw DataError("invalid time of day: " + std::string(s));
        }
        return from_parts(d, hh, mm);
    }

    static DateTime from_minutes(int64_t m) { return DateTime{m}; }

    int64_t minutes() const { return mins_; }

    Date date() const {
        int64_t d = mins_ >= 0 ? mins_ / 1440 : (mins_ - 1439) / 1440;
        return Date::from_serial(d);
    }

    unsigned hour() const { return unsigned((mins_ - date().serial() * 1440) / 60); }
    unsigned minute() const { return unsigned((mins_ - date().serial() * 1440) % 60); }

    DateTime plus_minutes(int64_t n) const { return DateTime{mins_ + n}; }

    // Signed difference in minutes (this - other).
    int64_t operator-(const DateTime& other) const { return mins_ - other.mins_; }

    std::string to_string() const {
        char buf[24];
        Date d = date();
        std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02u:%02u", d.year(),
                      d.month(), d.day(), hour(), minute());
        return buf;
    }

    auto operator<=>(const DateTime&) const = default;

private:
    explicit DateTime(int64_t m) : mins_(m) {}

    int64_t mins_ = 0;
};

}  // namespace airdisrupt
