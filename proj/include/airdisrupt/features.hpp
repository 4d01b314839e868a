#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "airdisrupt/calendar.hpp"
#include "airdisrupt/csv.hpp"
#include "airdisrupt/flights.hpp"
#include "airdisrupt/geo.hpp"
#include "airdisrupt/matrix.hpp"
#include "airdisrupt/parallel.hpp"

namespace airdisrupt {

// The four per-group daily metrics, in canonical column order.
enum class Metric { CX = 0, ArrD = 1, DD = 2, AirD = 3 };
inline constexpr int kMetricCount = 4;

inline const char* metric_name(Metric m) {
    switch (m) {
        case Metric::CX: return "CX";
        case Metric::ArrD: return "ArrD";
        case Metric::DD: return "DD";
        case Metric::AirD: return "AirD";
    }
    return "?";
}

inline Metric metric_from_name(const std::string& s) {
    if (s == "CX") return Metric::CX;
    if (s == "ArrD") return Metric::ArrD;
    if (s == "DD") return Metric::DD;
    if (s == "AirD") return Metric::AirD;
    throw DataError("unknown metric name: " + s);
}

// Per-flight delay minutes, max-with-zero form. aird is absent when any of
// wheels_off / wheels_on / plan_airborne_min is missing; such flights still
// count in the schedule denominators but add no airborne-delay minutes.
struct FlightDelays {
    double dd = 0.0;
    double arrd = 0.0;
    std::optional<double> aird;
};

inline FlightDelays flight_delays(const FlightRecord& r) {
    if (r.cancelled) {
        throw DataError("delays undefined for cancellations (flight " + r.flight_id + ")");
    }
    FlightDelays d;
    d.dd = std::max<double>(0.0, double(*r.actual_dep - r.sched_dep));
    d.arrd = std::max<double>(0.0, double(*r.actual_arr - r.sched_arr));
    if (r.wheels_off && r.wheels_on && r.plan_airborne_min) {
        double airborne = double(*r.wheels_on - *r.wheels_off);
        d.aird = std::max(0.0, airborne - double(*r.plan_airborne_min));
    }
    return d;
}

// One (day, group) cell. Counts include cancelled flights; the delay
// averages divide by the full scheduled counts (A or D), so cancelled
// flights dilute them. A zero-traffic cell is all zeros.
struct DailyGroupMetrics {
    int64_t a = 0;   // scheduled arrivals
    int64_t d = 0;   // scheduled departures
    int64_t ca = 0;  // cancelled arrivals
    int64_t cd = 0;  // cancelled departures
    double cx = 0.0;
    double dd_avg = 0.0;
    double arrd_avg = 0.0;
    double aird_avg = 0.0;
};

// Aggregate one group over flights already filtered to a single day.
// A flight arriving into the group counts toward a, one departing counts
// toward d; a flight internal to the group counts once as each.
inline DailyGroupMetrics aggregate_day_group(std::span<const FlightRecord> day_flights,
                                             const AirportGroup& group) {
    std::unordered_set<std::string> members(group.members.begin(), group.members.end());
    DailyGroupMetrics m;
    double dd_sum = 0.0, arrd_sum = 0.0, aird_sum = 0.0;
    for (const auto& f : day_flights) {
        bool arrives = members.count(f.destination) > 0;
        bool departs = members.count(f.origin) > 0;
        if (!arrives && !departs) continue;
        if (arrives) {
            ++m.a;
            if (f.cancelled) ++m.ca;
        }
        if (departs) {
            ++m.d;
            if (f.cancelled) ++m.cd;
        }
        if (!f.cancelled) {
            FlightDelays del = flight_delays(f);
            if (departs) dd_sum += del.dd;
            if (arrives) {
                arrd_sum += del.arrd;
                if (del.aird) aird_sum += *del.aird;
            }
        }
    }
    if (m.a + m.d > 0) m.cx = double(m.ca + m.cd) / double(m.a + m.d);
    if (m.d > 0) m.dd_avg = dd_sum / double(m.d);
    if (m.a > 0) {
        m.arrd_avg = arrd_sum / double(m.a);
        m.aird_avg = aird_sum / double(m.a);
    }
    return m;
}

// System-level totals for one day; feeds cluster profiles and reports.
// arrd_per_flight follows the same convention as the per-group averages:
// total arrival-delay minutes over all scheduled flights of the day.
struct NasDayStats {
    Date day;
    int64_t flights_total = 0;  // operated + cancelled
    int64_t cancelled = 0;
    double cx_rate = 0.0;
    double total_dd_min = 0.0;
    double total_arrd_min = 0.0;
    double total_aird_min = 0.0;
    double arrd_per_flight = 0.0;
    bool no_traffic = false;
};

inline NasDayStats aggregate_day_nas(Date day, std::span<const FlightRecord> day_flights) {
    NasDayStats s;
    s.day = day;
    for (const auto& f : day_flights) {
        ++s.flights_total;
        if (f.cancelled) {
            ++s.cancelled;
            continue;
        }
        FlightDelays del = flight_delays(f);
        s.total_dd_min += del.dd;
        s.total_arrd_min += del.arrd;
        if (del.aird) s.total_aird_min += *del.aird;
    }
    if (s.flights_total > 0) {
        s.cx_rate = double(s.cancelled) / double(s.flights_total);
        s.arrd_per_flight = s.total_arrd_min / double(s.flights_total);
    } else {
        s.no_traffic = true;
    }
    return s;
}

// Full (day x group) aggregation result.
struct DayGroupTable {
    std::vector<Date> days;                         // analysis order
    std::vector<std::string> group_order;           // west-to-east
    std::vector<std::vector<DailyGroupMetrics>> cells;  // [day][group]
    std::vector<NasDayStats> nas;                   // [day]
};

// Buckets flights by analysis day and aggregates every (day, group) cell.
// Flights outside the analysis days are dropped. Per-day work runs in
// parallel; per-day sums stay in input order so results are thread-count
// independent.
inline DayGroupTable aggregate(const std::vector<FlightRecord>& flights,
                               const std::vector<Date>& days,
                               const std::vector<AirportGroup>& groups,
                               int threads = 1) {
    DayGroupTable table;
    table.days = days;
    table.group_order = order_groups_by_longitude(groups);

    std::unordered_map<std::string, int> group_index;
    for (size_t gi = 0; gi < table.group_order.size(); ++gi) {
        group_index[table.group_order[gi]] = int(gi);
    }
    std::unordered_map<std::string, int> airport_to_group;
    for (const auto& g : groups) {
        int gi = group_index.at(g.group_id);
        for (const auto& code : g.members) airport_to_group[code] = gi;
    }

    std::unordered_map<int64_t, size_t> day_index;
    for (size_t i = 0; i < days.size(); ++i) day_index[days[i].serial()] = i;

    std::vector<std::vector<const FlightRecord*>> by_day(days.size());
    for (const auto& f : flights) {
        auto it = day_index.find(day_of(f).serial());
        if (it == day_index.end()) continue;
        by_day[it->second].push_back(&f);
    }

    const size_t n_groups = table.group_order.size();
    table.cells.assign(days.size(), std::vector<DailyGroupMetrics>(n_groups));
    table.nas.assign(days.size(), NasDayStats{});

    parallel_for(days.size(), threads, [&](size_t di) {
        auto& row = table.cells[di];
        std::vector<double> dd_sum(n_groups, 0.0), arrd_sum(n_groups, 0.0),
            aird_sum(n_groups, 0.0);
        NasDayStats nas;
        nas.day = table.days[di];
        for (const FlightRecord* f : by_day[di]) {
            auto oi = airport_to_group.find(f->origin);
            auto di2 = airport_to_group.find(f->destination);
            int dep_g = oi == airport_to_group.end() ? -1 : oi->second;
            int arr_g = di2 == airport_to_group.end() ? -1 : di2->second;

            ++nas.flights_total;
            if (f->cancelled) ++nas.cancelled;

            if (arr_g >= 0) {
                ++row[arr_g].a;
                if (f->cancelled) ++row[arr_g].ca;
            }
            if (dep_g >= 0) {
                ++row[dep_g].d;
                if (f->cancelled) ++row[dep_g].cd;
            }
            if (!f->cancelled) {
                FlightDelays del = flight_delays(*f);
                nas.total_dd_min += del.dd;
                nas.total_arrd_min += del.arrd;
                if (del.aird) nas.total_aird_min += *del.aird;
                if (dep_g >= 0) dd_sum[dep_g] += del.dd;
                if (arr_g >= 0) {
                    arrd_sum[arr_g] += del.arrd;
                    if (del.aird) aird_sum[arr_g] += *del.aird;
                }
            }
        }
        for (size_t g = 0; g < n_groups; ++g) {
            auto& m = row[g];
            if (m.a + m.d > 0) m.cx = double(m.ca + m.cd) / double(m.a + m.d);
            if (m.d > 0) m.dd_avg = dd_sum[g] / double(m.d);
            if (m.a > 0) {
                m.arrd_avg = arrd_sum[g] / double(m.a);
                m.aird_avg = aird_sum[g] / double(m.a);
            }
        }
        if (nas.flights_total > 0) {
            nas.cx_rate = double(nas.cancelled) / double(nas.flights_total);
            nas.arrd_per_flight = nas.total_arrd_min / double(nas.flights_total);
        } else {
            nas.no_traffic = true;
        }
        table.nas[di] = nas;
    });
    return table;
}

// -- feature matrix ------------------------------------------------------

struct ColumnKey {
    std::string group_id;
    Metric metric;

    std::string label() const { return group_id + ":" + metric_name(metric); }
    bool operator==(const ColumnKey&) const = default;
};

// Days x (4 * groups) matrix. Column order is west-to-east group blocks,
// each block CX, ArrD, DD, AirD. Carries standardization stats once
// standardize() has been applied.
struct FeatureMatrix {
    std::vector<Date> days;
    std::vector<ColumnKey> columns;
    Matrix values;
    std::vector<double> col_mean;
    std::vector<double> col_std;
    std::vector<bool> constant;  // flagged when population std < 1e-12
    bool standardized = false;
};

inline double metric_value(const DailyGroupMetrics& m, Metric metric) {
    switch (metric) {
        case Metric::CX: return m.cx;
        case Metric::ArrD: return m.arrd_avg;
        case Metric::DD: return m.dd_avg;
        case Metric::AirD: return m.aird_avg;
    }
    return 0.0;
}

inline FeatureMatrix build_matrix(const DayGroupTable& table) {
    FeatureMatrix fm;
    fm.days = table.days;
    const size_t n_groups = table.group_order.size();
    for (size_t g = 0; g < n_groups; ++g) {
        for (int m = 0; m < kMetricCount; ++m) {
            fm.columns.push_back({table.group_order[g], Metric(m)});
        }
    }
    fm.values = Matrix(table.days.size(), fm.columns.size());
    for (size_t di = 0; di < table.days.size(); ++di) {
        for (size_t g = 0; g < n_groups; ++g) {
            const auto& cell = table.cells[di][g];
            for (int m = 0; m < kMetricCount; ++m) {
                fm.values(di, g * kMetricCount + m) = metric_value(cell, Metric(m));
            }
        }
    }
    return fm;
}

// Per-column z-scores with population std. Columns with std < 1e-12 are
// flagged constant and zeroed so they cannot poison the correlation
// matrix. Column stats are always computed serially in column order.
inline FeatureMatrix standardize(const FeatureMatrix& raw) {
    const size_t n = raw.values.rows();
    const size_t f = raw.values.cols();
    if (n < 2) throw DataError("standardize needs at least 2 rows");

    FeatureMatrix out;
    out.days = raw.days;
    out.columns = raw.columns;
    out.values = Matrix(n, f);
    out.col_mean.resize(f);
    out.col_std.resize(f);
    out.constant.assign(f, false);
    out.standardized = true;

    for (size_t c = 0; c < f; ++c) {
        double mean = 0.0;
        for (size_t r = 0; r < n; ++r) mean += raw.values(r, c);
        mean /= double(n);
        double var = 0.0;
        for (size_t r = 0; r < n; ++r) {
            double d = raw.values(r, c) - mean;
            var += d * d;
        }
        double sd = std::sqrt(var / double(n));
        out.col_mean[c] = mean;
        out.col_std[c] = sd;
        if (sd < 1e-12) {
            out.constant[c] = true;
            for (size_t r = 0; r < n; ++r) out.values(r, c) = 0.0;
        } else {
            for (size_t r = 0; r < n; ++r) {
                out.values(r, c) = (raw.values(r, c) - mean) / sd;
            }
        }
    }
    return out;
}

// -- files ----------------------------------------------------------------

inline void write_features_csv(const std::string& path, const DayGroupTable& table) {
    csv::Writer w(path);
    w.raw_line("day,group_id,a,d,ca,cd,cx,dd_avg,arrd_avg,aird_avg");
    for (size_t di = 0; di < table.days.size(); ++di) {
        for (size_t g = 0; g < table.group_order.size(); ++g) {
            const auto& m = table.cells[di][g];
            w.field(table.days[di].to_string())
                .field(table.group_order[g])
                .field(m.a)
                .field(m.d)
                .field(m.ca)
                .field(m.cd)
                .field(m.cx)
                .field(m.dd_avg)
                .field(m.arrd_avg)
                .field(m.aird_avg);
            w.end_row();
        }
    }
}

// Rebuilds a DayGroupTable (cells only, no NAS stats) from features.csv.
// Days keep file order; groups keep their first-seen order, which is the
// west-to-east order the writer used.
inline DayGroupTable read_features_csv(const std::string& path) {
    csv::Reader reader(path);
    reader.read_header(
        {"day", "group_id", "a", "d", "ca", "cd", "cx", "dd_avg", "arrd_avg", "aird_avg"});
    DayGroupTable table;
    std::unordered_map<int64_t, size_t> day_index;
    std::unordered_map<std::string, size_t> group_index;
    std::vector<std::tuple<size_t, size_t, DailyGroupMetrics>> parsed;
    csv::Row row;
    while (reader.next(row)) {
        const std::string where = path + ":" + std::to_string(row.line_no);
        if (row.fields.size() != 10) throw DataError(where + ": expected 10 columns");
        Date day = Date::parse(row.fields[0]);
        auto [dit, day_new] = day_index.emplace(day.serial(), table.days.size());
        if (day_new) table.days.push_back(day);
        auto [git, group_new] = group_index.emplace(row.fields[1], table.group_order.size());
        if (group_new) table.group_order.push_back(row.fields[1]);
        DailyGroupMetrics m;
        m.a = csv::parse_int(row.fields[2], where);
        m.d = csv::parse_int(row.fields[3], where);
        m.ca = csv::parse_int(row.fields[4], where);
        m.cd = csv::parse_int(row.fields[5], where);
        m.cx = csv::parse_double(row.fields[6], where);
        m.dd_avg = csv::parse_double(row.fields[7], where);
        m.arrd_avg = csv::parse_double(row.fields[8], where);
        m.aird_avg = csv::parse_double(row.fields[9], where);
        parsed.emplace_back(dit->second, git->second, m);
    }
    table.cells.assign(table.days.size(),
                       std::vector<DailyGroupMetrics>(table.group_order.size()));
    for (const auto& [di, gi, m] : parsed) table.cells[di][gi] = m;
    return table;
}

inline void write_matrix_csv(const std::string& path, const FeatureMatrix& fm) {
    csv::Writer w(path);
    std::string header = "day";
    for (const auto& c : fm.columns) header += "," + c.label();
    w.raw_line(header);
    for (size_t r = 0; r < fm.values.rows(); ++r) {
        w.field(fm.days[r].to_string());
        for (size_t c = 0; c < fm.values.cols(); ++c) w.field(fm.values(r, c));
        w.end_row();
    }
}

inline FeatureMatrix read_matrix_csv(const std::string& path) {
    csv::Reader reader(path);
    auto header = reader.read_header({});
    if (header.empty() || header[0] != "day") {
        throw DataError(path + ": matrix header must start with \"day\"");
    }
    FeatureMatrix fm;
    for (size_t i = 1; i < header.size(); ++i) {
        size_t pos = header[i].rfind(':');
        if (pos == std::string::npos) {
            throw DataError(path + ": bad column label \"" + header[i] + "\"");
        }
        fm.columns.push_back(
            {header[i].substr(0, pos), metric_from_name(header[i].substr(pos + 1))});
    }
    std::vector<double> data;
    csv::Row row;
    while (reader.next(row)) {
        const std::string where = path + ":" + std::to_string(row.line_no);
        if (row.fields.size() != header.size()) {
            throw DataError(where + ": expected " + std::to_string(header.size()) +
                            " columns");
        }
        fm.days.push_back(Date::parse(row.fields[0]));
        for (size_t i = 1; i < row.fields.size(); ++i) {
            data.push_back(csv::parse_double(row.fields[i], where));
        }
    }
    fm.values = Matrix(fm.days.size(), fm.columns.size());
    fm.values.data() = std::move(data);
    return fm;
}

inline void write_day_stats_csv(const std::string& path,
                                const std::vector<NasDayStats>& stats) {
    csv::Writer w(path);
    w.raw_line(
        "day,flights_total,cancelled,cx_rate,total_dd_min,total_arrd_min,"
        "total_aird_min,arrd_per_flight,no_traffic");
    for (const auto& s : stats) {
        w.field(s.day.to_string())
            .field(s.flights_total)
            .field(s.cancelled)
            .field(s.cx_rate)
            .field(s.total_dd_min)
            .field(s.total_arrd_min)
            .field(s.total_aird_min)
            .field(s.arrd_per_flight)
            .field(s.no_traffic ? "1" : "0");
        w.end_row();
    }
}

inline std::vector<NasDayStats> read_day_stats_csv(const std::string& path) {
    csv::Reader reader(path);
    reader.read_header({"day", "flights_total", "cancelled", "cx_rate", "total_dd_min",
                        "total_arrd_min", "total_aird_min", "arrd_per_flight",
                        "no_traffic"});
    std::vector<NasDayStats> out;
    csv::Row row;
    while (reader.next(row)) {
        const std::string where = path + ":" + std::to_string(row.line_no);
        if (row.fields.size() != 9) throw DataError(where + ": expected 9 columns");
        NasDayStats s;
        s.day = Date::parse(row.fields[0]);
        s.flights_total = csv::parse_int(row.fields[1], where);
        s.cancelled = csv::parse_int(row.fields[2], where);
        s.cx_rate = csv::parse_double(row.fields[3], where);
        s.total_dd_min = csv::parse_double(row.fields[4], where);
        s.total_arrd_min = csv::parse_double(row.fields[5], where);
        s.total_aird_min = csv::parse_double(row.fields[6], where);
        s.arrd_per_flight = csv::parse_double(row.fields[7], where);
        s.no_traffic = row.fields[8] == "1";
        out.push_back(s);
    }
    return out;
}

}  // namespace airdisrupt
