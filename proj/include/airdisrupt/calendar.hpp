#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "airdisrupt/dates.hpp"
#include "airdisrupt/errors.hpp"

namespace airdisrupt {

struct DateRange {
    Date start;
    Date end;  // inclusive

    bool contains(Date d) const { return d >= start && d <= end; }
    int64_t length_days() const { return end.serial() - start.serial() + 1; }
};

// Analysis window: inclusive [start, end] minus a set of inclusive
// exclusion ranges. Exclusions must lie inside the window and must not
// overlap each other.
struct AnalysisWindow {
    Date start;
    Date end;
    std::vector<DateRange> exclusions;

    void validate() const {
        if (start > end) {
            throw ConfigError("analysis window start " + start.to_string() +
                              " is after end " + end.to_string());
        }
        auto sorted = exclusions;
        std::sort(sorted.begin(), sorted.end(),
                  [](const DateRange& a, const DateRange& b) { return a.start < b.start; });
        for (size_t i = 0; i < sorted.size(); ++i) {
            const auto& r = sorted[i];
            if (r.start > r.end) {
                throw ConfigError("exclusion range " + r.start.to_string() + ".." +
                                  r.end.to_string() + " is inverted");
            }
            if (r.start < start || r.end > end) {
                throw ConfigError("exclusion range " + r.start.to_string() + ".." +
                                  r.end.to_string() + " lies outside the window");
            }
            if (i > 0 && r.start <= sorted[i - 1].end) {
                throw ConfigError("exclusion ranges overlap at " + r.start.to_string());
            }
        }
    }

    bool excluded(Date d) const {
        for (const auto& r : exclusions) {
            if (r.contains(d)) return true;
        }
        return false;
    }

    bool contains(Date d) const { return d >= start && d <= end && !excluded(d); }
};

// Ascending dates of the window minus exclusions. Empty result is an error.
inline std::vector<Date> enumerate_days(const AnalysisWindow& window) {
    window.validate();
    std::vector<Date> days;
    days.reserve(size_t(window.end.serial() - window.start.serial() + 1));
    for (Date d = window.start; d <= window.end; d = d.next()) {
        if (!window.excluded(d)) days.push_back(d);
    }
    if (days.empty()) {
        throw ConfigError("analysis window contains no days after exclusions");
    }
    return days;
}

}  // namespace airdisrupt
