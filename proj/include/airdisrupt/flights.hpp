#pragma once

#include <optional>
#include <string>
#include <vector>

#include "airdisrupt/csv.hpp"
#include "airdisrupt/dates.hpp"
#include "airdisrupt/errors.hpp"

namespace airdisrupt {

// One scheduled commercial flight, operated or cancelled. Invariants:
//   cancelled == true  -> all actual_* fields absent
//   cancelled == false -> actual_dep and actual_arr present
// origin != destination; sched_arr >= sched_dep is deliberately NOT
// enforced (red-eyes and source-data quirks are kept as-is).
struct FlightRecord {
    std::string flight_id;
    std::string origin;
    std::string destination;
    DateTime sched_dep;
    DateTime sched_arr;
    std::optional<DateTime> actual_dep;
    std::optional<DateTime> wheels_off;
    std::optional<DateTime> wheels_on;
    std::optional<DateTime> actual_arr;
    std::optional<int64_t> plan_airborne_min;
    bool cancelled = false;
};

// A flight belongs to the day of its scheduled local departure; red-eyes
// arriving the next day stay with the departure date. Cancellations keep
// their scheduled day too.
inline Date day_of(const FlightRecord& record) { return record.sched_dep.date(); }

namespace detail {

inline const std::vector<std::string>& flights_header() {
    static const std::vector<std::string> cols = {
        "flight_id", "origin",    "dest",       "sched_dep",
        "sched_arr", "actual_dep", "wheels_off", "wheels_on",
        "actual_arr", "plan_airborne_min", "cancelled"};
    return cols;
}

inline std::optional<DateTime> opt_datetime(const std::string& field,
                                            const std::string& context) {
    if (field.empty()) return std::nullopt;
    try {
        return DateTime::parse(field);
    } catch (const DataError& e) {
        throw DataError(context + ": " + e.what());
    }
}

}  // namespace detail

// Reads flights.csv (header required, schema above). Malformed rows abort
// with the row number and offending column. Unknown airport codes are
// accepted here; group membership is resolved later.
inline std::vector<FlightRecord> parse_flights(const std::string& path) {
    csv::Reader reader(path);
    reader.read_header(detail::flights_header());

    std::vector<FlightRecord> out;
    csv::Row row;
    while (reader.next(row)) {
        const std::string where =
            path + ":" + std::to_string(row.line_no);
        if (row.fields.size() != 11) {
            throw DataError(where + ": expected 11 columns, got " +
                            std::to_string(row.fields.size()));
        }
        auto col = [&](size_t i) {
            return where + " column " + detail::flights_header()[i];
        };

        FlightRecord r;
        r.flight_id = row.fields[0];
        r.origin = row.fields[1];
        r.destination = row.fields[2];
        if (r.flight_id.empty()) throw DataError(col(0) + ": empty");
        if (r.origin.empty()) throw DataError(col(1) + ": empty");
        if (r.destination.empty()) throw DataError(col(2) + ": empty");
        if (r.origin == r.destination) {
            throw DataError(col(2) + ": origin equals destination (" + r.origin + ")");
        }
        try {
            r.sched_dep = DateTime::parse(row.fields[3]);
        } catch (const DataError& e) {
            throw DataError(col(3) + ": " + e.what());
        }
        try {
            r.sched_arr = DateTime::parse(row.fields[4]);
        } catch (const DataError& e) {
            throw DataError(col(4) + ": " + e.what());
        }
        r.actual_dep = detail::opt_datetime(row.fields[5], col(5));
        r.wheels_off = detail::opt_datetime(row.fields[6], col(6));
        r.wheels_on = detail::opt_datetime(row.fields[7], col(7));
        r.actual_arr = detail::opt_datetime(row.fields[8], col(8));
        if (!row.fields[9].empty()) {
            int64_t plan = csv::parse_int(row.fields[9], col(9));
            if (plan < 0) throw DataError(col(9) + ": negative plan airborne minutes");
            r.plan_airborne_min = plan;
        }
        const std::string& cx = row.fields[10];
        if (cx != "0" && cx != "1") {
            throw DataError(col(10) + ": expected 0 or 1, got \"" + cx + "\"");
        }
        r.cancelled = (cx == "1");

        if (r.cancelled) {
            if (r.actual_dep || r.wheels_off || r.wheels_on || r.actual_arr) {
                throw DataError(where + ": cancelled flight carries actual times");
            }
        } else {
            if (!r.actual_dep || !r.actual_arr) {
                throw DataError(where + ": incomplete operated flight (missing " +
                                std::string(!r.actual_dep ? "actual_dep" : "actual_arr") +
                                ")");
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

inline void write_flights(const std::string& path,
                          const std::vector<FlightRecord>& flights) {
    csv::Writer w(path);
    w.raw_line(
        "flight_id,origin,dest,sched_dep,sched_arr,actual_dep,wheels_off,"
        "wheels_on,actual_arr,plan_airborne_min,cancelled");
    auto opt = [](const std::optional<DateTime>& t) {
        return t ? t->to_string() : std::string();
    };
    for (const auto& f : flights) {
        w.field(f.flight_id)
            .field(f.origin)
            .field(f.destination)
            .field(f.sched_dep.to_string())
            .field(f.sched_arr.to_string())
            .field(opt(f.actual_dep))
            .field(opt(f.wheels_off))
            .field(opt(f.wheels_on))
            .field(opt(f.actual_arr))
            .field(f.plan_airborne_min ? std::to_string(*f.plan_airborne_min)
                                       : std::string())
            .field(f.cancelled ? "1" : "0");
        w.end_row();
    }
}

}  // namespace airdisrupt
