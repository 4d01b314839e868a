#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "airdisrupt/csv.hpp"
#include "airdisrupt/dates.hpp"
#include "airdisrupt/errors.hpp"
#include "airdisrupt/features.hpp"
#include "airdisrupt/geo.hpp"
#include "airdisrupt/kmeans.hpp"

namespace airdisrupt {

// One analysis day joined across clustering, anomaly scoring, and the
// system-level aggregates. The join is total: every day appears exactly
// once.
struct DayRecord {
    Date day;
    int cluster_id = 0;
    Typology typology = Typology::Smooth;
    std::string cluster_label;
    double raw_score = 0.0;
    double scaled_score = 0.0;
    NasDayStats stats;
    std::optional<double> opsnet_min;
};

inline std::vector<DayRecord> assemble_day_records(
    const std::vector<Date>& days, const std::vector<int>& assignments,
    const std::vector<ClusterProfile>& profiles, const std::vector<double>& raw_scores,
    const std::vector<double>& scaled_scores, const std::vector<NasDayStats>& stats,
    const std::map<int64_t, double>* opsnet = nullptr) {
    const size_t n = days.size();
    if (assignments.size() != n || raw_scores.size() != n || scaled_scores.size() != n ||
        stats.size() != n) {
        throw DataError("day record join inputs are not aligned");
    }
    std::map<int, const ClusterProfile*> by_cluster;
    for (const auto& p : profiles) by_cluster[p.cluster_id] = &p;

    std::vector<DayRecord> out(n);
    for (size_t i = 0; i < n; ++i) {
        DayRecord& r = out[i];
        r.day = days[i];
        r.cluster_id = assignments[i];
        auto it = by_cluster.find(r.cluster_id);
        if (it == by_cluster.end()) {
            throw DataError("day " + days[i].to_string() + " assigned to unknown cluster " +
                            std::to_string(r.cluster_id));
        }
        r.typology = it->second->typology;
        r.cluster_label = it->second->label;
        r.raw_score = raw_scores[i];
        r.scaled_score = scaled_scores[i];
        r.stats = stats[i];
        if (opsnet) {
            auto o = opsnet->find(days[i].serial());
            if (o == opsnet->end()) {
                throw DataError("opsnet file is missing day " + days[i].to_string());
            }
            r.opsnet_min = o->second;
        }
    }
    return out;
}

// -- anomaly-score CDF shaded by cluster -------------------------------------

struct CdfRow {
    Date day;
    double scaled_score = 0.0;
    double cum_fraction = 0.0;
    int cluster_id = 0;
};

inline std::vector<CdfRow> score_cdf_by_cluster(const std::vector<DayRecord>& records) {
    std::vector<CdfRow> rows;
    rows.reserve(records.size());
    for (const auto& r : records) {
        rows.push_back({r.day, r.scaled_score, 0.0, r.cluster_id});
    }
    std::sort(rows.begin(), rows.end(), [](const CdfRow& a, const CdfRow& b) {
        if (a.scaled_score != b.scaled_score) return a.scaled_score < b.scaled_score;
        return a.day < b.day;
    });
    for (size_t i = 0; i < rows.size(); ++i) {
        rows[i].cum_fraction = double(i + 1) / double(rows.size());
    }
    return rows;
}

// -- per-cluster boxplots -----------------------------------------------------

struct BoxplotRow {
    int cluster_id = 0;
    size_t n = 0;
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
    double mean = 0.0;
    std::vector<std::pair<Date, double>> outliers;  // beyond 1.5 IQR whiskers
};

namespace detail {

// Linear interpolation between order statistics (sorted input).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw DataError("quantile of empty set");
    if (sorted.size() == 1) return sorted[0];
    double h = double(sorted.size() - 1) * p;
    size_t i = size_t(h);
    if (i + 1 >= sorted.size()) return sorted.back();
    return sorted[i] + (h - double(i)) * (sorted[i + 1] - sorted[i]);
}

}  // namespace detail

// Five-number summaries per cluster, ordered smooth to disrupted by mean
// scaled score. Outliers are points beyond 1.5 IQR from the quartiles.
inline std::vector<BoxplotRow> boxplot_stats_by_cluster(
    const std::vector<DayRecord>& records) {
    std::map<int, std::vector<std::pair<Date, double>>> by_cluster;
    for (const auto& r : records) {
        by_cluster[r.cluster_id].push_back({r.day, r.scaled_score});
    }
    std::vector<BoxplotRow> rows;
    for (auto& [cid, members] : by_cluster) {
        std::sort(members.begin(), members.end(),
                  [](const auto& a, const auto& b) {
                      if (a.second != b.second) return a.second < b.second;
                      return a.first < b.first;
                  });
        std::vector<double> scores;
        scores.reserve(members.size());
        double mean = 0.0;
        for (const auto& [day, s] : members) {
            scores.push_back(s);
            mean += s;
        }
        mean /= double(scores.size());

        BoxplotRow row;
        row.cluster_id = cid;
        row.n = scores.size();
        row.min = scores.front();
        row.max = scores.back();
        row.q1 = detail::quantile_sorted(scores, 0.25);
        row.median = detail::quantile_sorted(scores, 0.5);
        row.q3 = detail::quantile_sorted(scores, 0.75);
        row.mean = mean;
        double iqr = row.q3 - row.q1;
        double lo = row.q1 - 1.5 * iqr, hi = row.q3 + 1.5 * iqr;
        for (const auto& [day, s] : members) {
            if (s < lo || s > hi) row.outliers.push_back({day, s});
        }
        rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [](const BoxplotRow& a, const BoxplotRow& b) {
        if (a.mean != b.mean) return a.mean < b.mean;
        return a.cluster_id < b.cluster_id;
    });
    return rows;
}

// -- representative-day maps ---------------------------------------------------

struct MapPoint {
    std::string group_id;
    double lat = 0.0;
    double lon = 0.0;
    double cx = 0.0;        // drives circle size
    double arrd_avg = 0.0;  // drives color
    double size_norm = 0.0;   // cx on a fixed 0..0.5 scale
    double color_norm = 0.0;  // arrd on a fixed 0..60 min scale
};

inline constexpr double kMapCxFullScale = 0.5;
inline constexpr double kMapArrdFullScaleMin = 60.0;

// Geo scatter for one day: circle size encodes the group cancellation
// rate, color the average arrival delay, both also emitted on fixed
// linear [0,1] scales.
inline std::vector<MapPoint> day_map(const DayGroupTable& table, Date day,
                                     const std::vector<AirportGroup>& groups) {
    size_t di = table.days.size();
    for (size_t i = 0; i < table.days.size(); ++i) {
        if (table.days[i] == day) {
            di = i;
            break;
        }
    }
    if (di == table.days.size()) {
        throw DataError("no aggregates for day " + day.to_string());
    }
    std::map<std::string, const AirportGroup*> by_id;
    for (const auto& g : groups) by_id[g.group_id] = &g;

    std::vector<MapPoint> points;
    for (size_t gi = 0; gi < table.group_order.size(); ++gi) {
        auto it = by_id.find(table.group_order[gi]);
        if (it == by_id.end()) {
            throw DataError("map: unknown group " + table.group_order[gi]);
        }
        const auto& m = table.cells[di][gi];
        MapPoint p;
        p.group_id = table.group_order[gi];
        p.lat = it->second->centroid_lat;
        p.lon = it->second->centroid_lon;
        p.cx = m.cx;
        p.arrd_avg = m.arrd_avg;
        p.size_norm = std::clamp(m.cx / kMapCxFullScale, 0.0, 1.0);
        p.color_norm = std::clamp(m.arrd_avg / kMapArrdFullScaleMin, 0.0, 1.0);
        points.push_back(std::move(p));
    }
    return points;
}

// -- disruption trends -----------------------------------------------------------

enum class TrendBucket { Year, Month };

struct TrendRow {
    int bucket = 0;  // calendar year, or month 1..12 pooled across years
    size_t days_total = 0;
    size_t days_disrupted = 0;
    double ratio = 0.0;
    std::map<int, size_t> per_cluster;  // disrupted cluster id -> day count
};

// Ratio of days falling in the named disrupted clusters per year or per
// calendar month (months pool the same month across years).
inline std::vector<TrendRow> trend_ratios(const std::vector<DayRecord>& records,
                                          const std::vector<int>& disrupted_clusters,
                                          TrendBucket by) {
    std::map<int, TrendRow> buckets;
    std::vector<bool> disrupted_lookup;
    for (int c : disrupted_clusters) {
        if (c >= int(disrupted_lookup.size())) disrupted_lookup.resize(size_t(c) + 1, false);
        disrupted_lookup[size_t(c)] = true;
    }
    auto is_disrupted = [&](int c) {
        return c >= 0 && c < int(disrupted_lookup.size()) && disrupted_lookup[size_t(c)];
    };
    for (const auto& r : records) {
        int key = by == TrendBucket::Year ? r.day.year() : int(r.day.month());
        TrendRow& row = buckets[key];
        row.bucket = key;
        ++row.days_total;
        if (is_disrupted(r.cluster_id)) {
            ++row.days_disrupted;
            ++row.per_cluster[r.cluster_id];
        }
    }
    std::vector<TrendRow> out;
    for (auto& [key, row] : buckets) {
        row.ratio = double(row.days_disrupted) / double(row.days_total);
        out.push_back(std::move(row));
    }
    return out;
}

// -- cumulative metric shares -------------------------------------------------------

struct SharesTable {
    std::vector<std::string> metrics;  // present metrics in fixed order
    std::vector<int> cluster_order;    // disruption first
    // share_pct[c][m] and cumulative_pct[c][m] follow cluster_order / metrics.
    std::vector<std::vector<double>> share_pct;
    std::vector<std::vector<double>> cumulative_pct;
};

// Shares of day counts, cancellations, OPSNET delay (when ingested) and
// the three delay totals per cluster, cumulated from the most disrupted
// cluster down to the smoothest. Each metric cumulates to 100%.
inline SharesTable cumulative_metric_shares(const std::vector<DayRecord>& records,
                                            const std::vector<int>& cluster_order) {
    bool have_opsnet = !records.empty();
    for (const auto& r : records) {
        have_opsnet = have_opsnet && r.opsnet_min.has_value();
    }

    SharesTable table;
    table.cluster_order = cluster_order;
    table.metrics = {"days", "cancellations"};
    if (have_opsnet) table.metrics.push_back("opsnet_delay");
    table.metrics.insert(table.metrics.end(),
                         {"arrival_delay", "departure_delay", "airborne_delay"});

    const size_t m = table.metrics.size();
    std::map<int, std::vector<double>> totals;
    std::vector<double> corpus(m, 0.0);
    for (const auto& r : records) {
        auto& t = totals[r.cluster_id];
        if (t.empty()) t.assign(m, 0.0);
        size_t i = 0;
        auto add = [&](double v) {
            t[i] += v;
            corpus[i] += v;
            ++i;
        };
        add(1.0);
        add(double(r.stats.cancelled));
        if (have_opsnet) add(*r.opsnet_min);
        add(r.stats.total_arrd_min);
        add(r.stats.total_dd_min);
        add(r.stats.total_aird_min);
    }

    std::vector<double> cum(m, 0.0);
    for (int cid : cluster_order) {
        std::vector<double> share(m, 0.0);
        auto it = totals.find(cid);
        for (size_t i = 0; i < m; ++i) {
            double v = it == totals.end() ? 0.0 : it->second[i];
            share[i] = corpus[i] > 0.0 ? 100.0 * v / corpus[i] : 0.0;
            cum[i] += share[i];
        }
        table.share_pct.push_back(share);
        table.cumulative_pct.push_back(cum);
    }
    return table;
}

// -- files --------------------------------------------------------------------------

inline void write_cdf_csv(const std::string& path, const std::vector<CdfRow>& rows) {
    csv::Writer w(path);
    w.raw_line("day,scaled_score,cum_fraction,cluster_id");
    for (const auto& r : rows) {
        w.field(r.day.to_string()).field(r.scaled_score).field(r.cum_fraction).field(
            r.cluster_id);
        w.end_row();
    }
}

inline void write_boxplots_csv(const std::string& path,
                               const std::vector<BoxplotRow>& rows) {
    csv::Writer w(path);
    w.raw_line("cluster_id,n,min,q1,median,q3,max,mean,outliers");
    for (const auto& r : rows) {
        std::string outliers;
        for (const auto& [day, s] : r.outliers) {
            if (!outliers.empty()) outliers += ';';
            outliers += day.to_string() + "=" + csv::format_double(s);
        }
        w.field(r.cluster_id)
            .field(r.n)
            .field(r.min)
            .field(r.q1)
            .field(r.median)
            .field(r.q3)
            .field(r.max)
            .field(r.mean)
            .field(outliers);
        w.end_row();
    }
}

inline void write_map_csv(const std::string& path, const std::vector<MapPoint>& points) {
    csv::Writer w(path);
    w.raw_line("group_id,lat,lon,cx,arrd_avg,size_norm,color_norm");
    for (const auto& p : points) {
        w.field(p.group_id)
            .field(p.lat)
            .field(p.lon)
            .field(p.cx)
            .field(p.arrd_avg)
            .field(p.size_norm)
            .field(p.color_norm);
        w.end_row();
    }
}

// Thin fixed-scale SVG rendering of a day map (green = on-time, red =
// delayed; circle radius tracks cancellation rate).
inline void write_map_svg(const std::string& path, Date day,
                          const std::vector<MapPoint>& points) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open file for writing: " + path);
    const double w = 860, h = 520;
    const double lon_min = -130, lon_max = -60, lat_min = 22, lat_max = 52;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\""
        << h << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    out << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"#f8f9fb\"/>\n";
    out << "<text x=\"16\" y=\"28\" font-family=\"sans-serif\" font-size=\"18\">"
        << day.to_string() << "</text>\n";
    for (const auto& p : points) {
        double x = (p.lon - lon_min) / (lon_max - lon_min) * (w - 60) + 30;
        double y = h - ((p.lat - lat_min) / (lat_max - lat_min) * (h - 80) + 40);
        double r = 4.0 + 18.0 * p.size_norm;
        int red = int(std::lround(40 + 180 * p.color_norm));
        int green = int(std::lround(170 - 140 * p.color_norm));
        out << "<circle cx=\"" << csv::format_double(x) << "\" cy=\""
            << csv::format_double(y) << "\" r=\"" << csv::format_double(r)
            << "\" fill=\"rgb(" << red << "," << green
            << ",60)\" fill-opacity=\"0.75\"/>\n";
        out << "<text x=\"" << csv::format_double(x + r + 2) << "\" y=\""
            << csv::format_double(y + 4)
            << "\" font-family=\"sans-serif\" font-size=\"10\">" << p.group_id
            << "</text>\n";
    }
    out << "</svg>\n";
}

inline void write_trends_csv(const std::string& path, const std::vector<TrendRow>& rows,
                             const std::vector<int>& disrupted_clusters) {
    csv::Writer w(path);
    std::string header = "bucket,days_total,days_disrupted,ratio";
    for (int c : disrupted_clusters) header += ",cluster_" + std::to_string(c) + "_ratio";
    w.raw_line(header);
    for (const auto& r : rows) {
        w.field(r.bucket).field(r.days_total).field(r.days_disrupted).field(r.ratio);
        for (int c : disrupted_clusters) {
            auto it = r.per_cluster.find(c);
            double cr = it == r.per_cluster.end()
                            ? 0.0
                            : double(it->second) / double(r.days_total);
            w.field(cr);
        }
        w.end_row();
    }
}

inline void write_shares_csv(const std::string& path, const SharesTable& table) {
    csv::Writer w(path);
    std::string header = "cluster_id";
    for (const auto& m : table.metrics) header += ",share_" + m;
    for (const auto& m : table.metrics) header += ",cum_" + m;
    w.raw_line(header);
    for (size_t i = 0; i < table.cluster_order.size(); ++i) {
        w.field(table.cluster_order[i]);
        for (double v : table.share_pct[i]) w.field(v);
        for (double v : table.cumulative_pct[i]) w.field(v);
        w.end_row();
    }
}

inline std::map<int64_t, double> read_opsnet_csv(const std::string& path) {
    csv::Reader reader(path);
    reader.read_header({"day", "opsnet_delay_min"});
    std::map<int64_t, double> out;
    csv::Row row;
    while (reader.next(row)) {
        const std::string where = path + ":" + std::to_string(row.line_no);
        if (row.fields.size() != 2) throw DataError(where + ": expected 2 columns");
        Date d = Date::parse(row.fields[0]);
        double v = csv::parse_double(row.fields[1], where);
        if (!out.emplace(d.serial(), v).second) {
            throw DataError(where + ": duplicate opsnet day " + d.to_string());
        }
    }
    return out;
}

}  // namespace airdisrupt
