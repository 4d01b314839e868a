#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "airdisrupt/csv.hpp"
#include "airdisrupt/dates.hpp"
#include "airdisrupt/errors.hpp"
#include "airdisrupt/features.hpp"
#include "airdisrupt/matrix.hpp"
#include "airdisrupt/parallel.hpp"
#include "airdisrupt/rng.hpp"

namespace airdisrupt {

struct KMeansModel {
    int k = 0;
    Matrix centroids;             // k x dims
    std::vector<int> assignments;  // point -> cluster id
    double inertia = 0.0;          // within-cluster scatter (sum of squared distances)
    uint64_t seed = 0;
    int restarts = 0;
    int iterations = 0;
    std::vector<double> inertia_history;  // per Lloyd iteration of the winning restart
};

namespace detail {

inline std::pair<int, double> nearest_centroid(const Matrix& points, size_t p,
                                               const Matrix& centroids) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < centroids.rows(); ++c) {
        double d = squared_distance(points.row_ptr(p), centroids.row_ptr(c),
                                    points.cols());
        if (d < best_d) {  // ties keep the lower cluster id
            best_d = d;
            best = int(c);
        }
    }
    return {best, best_d};
}

inline Matrix kmeanspp_init(const Matrix& points, int k, Rng& rng) {
    const size_t n = points.rows(), dims = points.cols();
    Matrix centroids(size_t(k), dims);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());

    size_t first = size_t(rng.uniform_index(n));
    for (size_t c = 0; c < dims; ++c) centroids(0, c) = points(first, c);

    for (int j = 1; j < k; ++j) {
        double total = 0.0;
        for (size_t p = 0; p < n; ++p) {
            double d = squared_distance(points.row_ptr(p),
                                        centroids.row_ptr(size_t(j - 1)), dims);
            d2[p] = std::min(d2[p], d);
            total += d2[p];
        }
        size_t pick;
        if (total <= 0.0) {
            pick = size_t(rng.uniform_index(n));
        } else {
            double r = rng.uniform01() * total;
            double acc = 0.0;
            pick = n - 1;
            for (size_t p = 0; p < n; ++p) {
                acc += d2[p];
                if (acc >= r) {
                    pick = p;
                    break;
                }
            }
        }
        for (size_t c = 0; c < dims; ++c) centroids(size_t(j), c) = points(pick, c);
    }
    return centroids;
}

struct LloydResult {
    Matrix centroids;
    std::vector<int> assignments;
    double inertia = 0.0;
    int iterations = 0;
    std::vector<double> history;
};

inline LloydResult lloyd(const Matrix& points, int k, Rng rng, double shift_tol = 1e-6,
                         int max_iter = 300) {
    const size_t n = points.rows(), dims = points.cols();
    LloydResult res;
    res.centroids = kmeanspp_init(points, k, rng);
    res.assignments.assign(n, 0);
    std::vector<double> dist2(n, 0.0);

    auto assign_all = [&]() {
        double inertia = 0.0;
        for (size_t p = 0; p < n; ++p) {
            auto [c, d] = nearest_centroid(points, p, res.centroids);
            res.assignments[p] = c;
            dist2[p] = d;
            inertia += d;
        }
        return inertia;
    };

    // An emptied cluster takes the point currently farthest from its own
    // centroid; this never increases the scatter.
    auto repair_empties = [&](double inertia) {
        std::vector<int> counts(size_t(k), 0);
        for (int a : res.assignments) ++counts[size_t(a)];
        for (int c = 0; c < k; ++c) {
            if (counts[size_t(c)] > 0) continue;
            size_t worst = 0;
            double worst_d = -1.0;
            for (size_t p = 0; p < n; ++p) {
                if (counts[size_t(res.assignments[p])] <= 1) continue;
                if (dist2[p] > worst_d) {
                    worst_d = dist2[p];
                    worst = p;
                }
            }
            --counts[size_t(res.assignments[worst])];
            res.assignments[worst] = c;
            counts[size_t(c)] = 1;
            for (size_t j = 0; j < dims; ++j) res.centroids(size_t(c), j) = points(worst, j);
            inertia -= dist2[worst];
            dist2[worst] = 0.0;
        }
        return inertia;
    };

    for (int iter = 1; iter <= max_iter; ++iter) {
        res.iterations = iter;
        double inertia = assign_all();
        inertia = repair_empties(inertia);
        res.history.push_back(inertia);
        res.inertia = inertia;

        Matrix next(size_t(k), dims);
        std::vector<int> counts(size_t(k), 0);
        for (size_t p = 0; p < n; ++p) {
            int c = res.assignments[p];
            ++counts[size_t(c)];
            for (size_t j = 0; j < dims; ++j) next(size_t(c), j) += points(p, j);
        }
        double shift = 0.0;
        for (int c = 0; c < k; ++c) {
            for (size_t j = 0; j < dims; ++j) next(size_t(c), j) /= double(counts[size_t(c)]);
            shift = std::max(shift, std::sqrt(squared_distance(
                                        next.row_ptr(size_t(c)),
                                        res.centroids.row_ptr(size_t(c)), dims)));
        }
        res.centroids = std::move(next);
        if (shift < shift_tol) break;
    }

    res.inertia = assign_all();
    res.inertia = repair_empties(res.inertia);
    return res;
}

}  // namespace detail

// Lloyd's algorithm with k-means++ seeding, best of `restarts` runs by
// (inertia, restart index). Restart seeds derive from the master seed by
// counter, and restarts run in parallel without affecting the winner.
inline KMeansModel fit_kmeans(const Matrix& points, int k, uint64_t seed,
                              int restarts = 10, int threads = 1) {
    if (k < 1) throw ConfigError("k-means needs k >= 1");
    if (size_t(k) > points.rows()) {
        throw ConfigError("k-means k=" + std::to_string(k) + " exceeds " +
                          std::to_string(points.rows()) + " points");
    }
    if (restarts < 1) throw ConfigError("k-means needs at least 1 restart");

    std::vector<detail::LloydResult> runs(static_cast<size_t>(restarts));
    parallel_for(size_t(restarts), threads, [&](size_t r) {
        runs[r] = detail::lloyd(points, k, Rng(derive_seed(seed, r)));
    });

    size_t best = 0;
    for (size_t r = 1; r < runs.size(); ++r) {
        if (runs[r].inertia < runs[best].inertia) best = r;
    }

    KMeansModel model;
    model.k = k;
    model.centroids = std::move(runs[best].centroids);
    model.assignments = std::move(runs[best].assignments);
    model.inertia = runs[best].inertia;
    model.seed = seed;
    model.restarts = restarts;
    model.iterations = runs[best].iterations;
    model.inertia_history = std::move(runs[best].history);
    return model;
}

// Mean silhouette over all points, full pairwise distances. Points in
// singleton clusters contribute 0.
inline double silhouette(const Matrix& points, const std::vector<int>& assignments,
                         int threads = 1) {
    const size_t n = points.rows();
    if (n != assignments.size()) throw DataError("silhouette: assignment size mismatch");
    int k = 0;
    for (int a : assignments) k = std::max(k, a + 1);
    std::vector<size_t> cluster_size(size_t(k), 0);
    for (int a : assignments) ++cluster_size[size_t(a)];
    size_t non_empty = 0;
    for (size_t s : cluster_size) non_empty += s > 0 ? 1 : 0;
    if (non_empty < 2) throw DataError("silhouette needs at least 2 non-empty clusters");

    std::vector<double> s(n, 0.0);
    parallel_for(n, threads, [&](size_t i) {
        std::vector<double> sum(size_t(k), 0.0);
        for (size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            sum[size_t(assignments[j])] += std::sqrt(
                squared_distance(points.row_ptr(i), points.row_ptr(j), points.cols()));
        }
        int own = assignments[i];
        if (cluster_size[size_t(own)] <= 1) {
            s[i] = 0.0;
            return;
        }
        double a = sum[size_t(own)] / double(cluster_size[size_t(own)] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            if (c == own || cluster_size[size_t(c)] == 0) continue;
            b = std::min(b, sum[size_t(c)] / double(cluster_size[size_t(c)]));
        }
        double m = std::max(a, b);
        s[i] = m > 0.0 ? (b - a) / m : 0.0;
    });
    double total = 0.0;
    for (double v : s) total += v;
    return total / double(n);
}

// -- k sweep ---------------------------------------------------------------

struct SweepRow {
    int k = 0;
    double silhouette = 0.0;
    double ws = 0.0;  // within-cluster scatter (inertia)
    std::string flags;
};

// Fits one model per k (shared seed policy) and emits diagnostics for the
// human k choice: local silhouette maxima plus the sharpest WS elbow
// (largest second difference).
inline std::vector<SweepRow> sweep_k(const Matrix& points, int k_min, int k_max,
                                     uint64_t seed, int restarts = 10, int threads = 1) {
    if (k_min < 2) throw ConfigError("k sweep starts at k >= 2 (silhouette needs it)");
    if (size_t(k_max) > points.rows()) {
        throw ConfigError("k sweep upper bound exceeds point count");
    }
    if (k_max < k_min) throw ConfigError("empty k sweep range");

    std::vector<SweepRow> rows;
    for (int k = k_min; k <= k_max; ++k) {
        KMeansModel m = fit_kmeans(points, k, seed, restarts, threads);
        SweepRow r;
        r.k = k;
        r.ws = m.inertia;
        r.silhouette = silhouette(points, m.assignments, threads);
        rows.push_back(r);
    }

    auto flag = [](SweepRow& r, const char* f) {
        if (!r.flags.empty()) r.flags += ';';
        r.flags += f;
    };
    for (size_t i = 0; i < rows.size(); ++i) {
        bool left_ok = i == 0 || rows[i].silhouette > rows[i - 1].silhouette;
        bool right_ok = i + 1 == rows.size() || rows[i].silhouette > rows[i + 1].silhouette;
        if (left_ok && right_ok) flag(rows[i], "silhouette-local-max");
    }
    if (rows.size() >= 3) {
        size_t elbow = 0;
        double best = -std::numeric_limits<double>::infinity();
        for (size_t i = 1; i + 1 < rows.size(); ++i) {
            double d2 = rows[i - 1].ws - 2.0 * rows[i].ws + rows[i + 1].ws;
            if (d2 > best) {
                best = d2;
                elbow = i;
            }
        }
        if (elbow > 0) flag(rows[elbow], "ws-elbow");
    }
    return rows;
}

// -- cluster profiles and typologies ----------------------------------------

enum class Typology { Smooth, RegionalDisturbance, RegionalDisruption, NASDisruption };

inline const char* typology_name(Typology t) {
    switch (t) {
        case Typology::Smooth: return "Smooth";
        case Typology::RegionalDisturbance: return "Regional Disturbance";
        case Typology::RegionalDisruption: return "Regional Disruption";
        case Typology::NASDisruption: return "NAS Disruption";
    }
    return "?";
}

inline Typology typology_from_name(const std::string& s) {
    if (s == "Smooth") return Typology::Smooth;
    if (s == "Regional Disturbance") return Typology::RegionalDisturbance;
    if (s == "Regional Disruption") return Typology::RegionalDisruption;
    if (s == "NAS Disruption") return Typology::NASDisruption;
    throw DataError("unknown typology: " + s);
}

struct ClusterProfile {
    int cluster_id = 0;
    size_t n_days = 0;
    double concentration = 0.0;      // mean member distance to centroid
    double fraction_days_pct = 0.0;  // percentage of all days
    double avg_anomaly = 0.0;        // mean scaled anomaly score
    double avg_sched_flights = 0.0;  // cancelled + operated
    double avg_cx_rate_pct = 0.0;
    double avg_arrd_per_flight = 0.0;  // minutes
    Typology typology = Typology::Smooth;
    std::string label;
};

// Per-cluster means of member-day values. All vectors are aligned with the
// clustering input rows; distances are each day's Euclidean distance to
// its assigned centroid.
inline std::vector<ClusterProfile> profile_clusters(
    const std::vector<int>& assignments, const std::vector<double>& distances, int k,
    const std::vector<NasDayStats>& day_stats, const std::vector<double>& scaled_scores) {
    const size_t n = assignments.size();
    if (day_stats.size() != n || scaled_scores.size() != n || distances.size() != n) {
        throw DataError("profile inputs are not aligned with clustered days");
    }
    std::vector<ClusterProfile> profiles(static_cast<size_t>(k));
    for (int c = 0; c < k; ++c) profiles[size_t(c)].cluster_id = c;
    for (size_t p = 0; p < n; ++p) {
        if (assignments[p] < 0 || assignments[p] >= k) {
            throw DataError("cluster id out of range in profile input");
        }
        auto& prof = profiles[size_t(assignments[p])];
        ++prof.n_days;
        prof.concentration += distances[p];
        prof.avg_anomaly += scaled_scores[p];
        prof.avg_sched_flights += double(day_stats[p].flights_total);
        prof.avg_cx_rate_pct += 100.0 * day_stats[p].cx_rate;
        prof.avg_arrd_per_flight += day_stats[p].arrd_per_flight;
    }
    for (auto& prof : profiles) {
        if (prof.n_days == 0) continue;
        double m = double(prof.n_days);
        prof.concentration /= m;
        prof.avg_anomaly /= m;
        prof.avg_sched_flights /= m;
        prof.avg_cx_rate_pct /= m;
        prof.avg_arrd_per_flight /= m;
        prof.fraction_days_pct = 100.0 * m / double(n);
    }
    return profiles;
}

inline std::vector<double> centroid_distances(const Matrix& points,
                                              const KMeansModel& model) {
    std::vector<double> d(points.rows());
    for (size_t p = 0; p < points.rows(); ++p) {
        d[p] = std::sqrt(squared_distance(points.row_ptr(p),
                                          model.centroids.row_ptr(size_t(model.assignments[p])),
                                          points.cols()));
    }
    return d;
}

inline std::vector<ClusterProfile> profile_clusters(
    const Matrix& points, const KMeansModel& model,
    const std::vector<NasDayStats>& day_stats, const std::vector<double>& scaled_scores) {
    return profile_clusters(model.assignments, centroid_distances(points, model), model.k,
                            day_stats, scaled_scores);
}

// Heuristic thresholds for naming cluster types; config-exposed, defaults
// calibrated against full-scale reference profiles.
struct TypologyThresholds {
    double nas_cx_pct = 15.0;
    double nas_cx_alt_pct = 10.0;
    double nas_arrd_min = 35.0;
    double disruption_anomaly = 0.25;
    double disturbance_anomaly = 0.18;
};

inline Typology classify_one(const ClusterProfile& p, const TypologyThresholds& t) {
    if (p.avg_cx_rate_pct >= t.nas_cx_pct ||
        (p.avg_cx_rate_pct >= t.nas_cx_alt_pct && p.avg_arrd_per_flight >= t.nas_arrd_min)) {
        return Typology::NASDisruption;
    }
    if (p.avg_anomaly >= t.disruption_anomaly) return Typology::RegionalDisruption;
    if (p.avg_anomaly >= t.disturbance_anomaly) return Typology::RegionalDisturbance;
    return Typology::Smooth;
}

// Optional geography for label tags: per-cluster mean standardized feature
// rows plus the west-to-east group order behind the columns.
struct GeoTagContext {
    Matrix cluster_mean_z;            // k x features
    std::vector<ColumnKey> columns;   // feature column keys
    std::vector<std::string> group_order;  // west to east
};

namespace detail {

// Dominant longitude band of a cluster's worst cells: groups are split
// into west/central/east thirds of the west-to-east order, and the top
// tenth of columns (at least 4) by mean z vote with their band.
inline std::string longitude_band_tag(const GeoTagContext& ctx, int cluster) {
    const size_t f = ctx.columns.size();
    if (f == 0 || ctx.group_order.empty()) return "";
    std::unordered_map<std::string, size_t> group_rank;
    for (size_t i = 0; i < ctx.group_order.size(); ++i) group_rank[ctx.group_order[i]] = i;

    std::vector<size_t> order(f);
    for (size_t i = 0; i < f; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return ctx.cluster_mean_z(size_t(cluster), a) >
               ctx.cluster_mean_z(size_t(cluster), b);
    });
    size_t take = std::max<size_t>(4, f / 10);
    take = std::min(take, f);

    const size_t g = ctx.group_order.size();
    size_t counts[3] = {0, 0, 0};
    for (size_t i = 0; i < take; ++i) {
        auto it = group_rank.find(ctx.columns[order[i]].group_id);
        if (it == group_rank.end()) continue;
        size_t band = std::min<size_t>(2, it->second * 3 / std::max<size_t>(1, g));
        ++counts[band];
    }
    size_t total = counts[0] + counts[1] + counts[2];
    if (total == 0) return "";
    static const char* names[3] = {"west", "central", "east"};
    for (int b = 0; b < 3; ++b) {
        if (double(counts[b]) >= 0.6 * double(total)) return names[b];
    }
    return "mixed";
}

}  // namespace detail

// Rule-based typing of cluster profiles; appends a longitude-band tag to
// non-Smooth labels when geography is available.
inline void classify_typology(std::vector<ClusterProfile>& profiles,
                              const TypologyThresholds& thresholds,
                              const GeoTagContext* geo = nullptr) {
    for (auto& p : profiles) {
        p.typology = classify_one(p, thresholds);
        p.label = typology_name(p.typology);
        if (geo && p.typology != Typology::Smooth) {
            std::string tag = detail::longitude_band_tag(*geo, p.cluster_id);
            if (!tag.empty()) p.label += " (" + tag + ")";
        }
    }
}

// -- files -------------------------------------------------------------------

inline void write_clusters_csv(const std::string& path, const std::vector<Date>& days,
                               const Matrix& points, const KMeansModel& model) {
    auto distances = centroid_distances(points, model);
    csv::Writer w(path);
    w.raw_line("day,cluster_id,distance_to_centroid");
    for (size_t p = 0; p < days.size(); ++p) {
        w.field(days[p].to_string()).field(model.assignments[p]).field(distances[p]);
        w.end_row();
    }
}

struct ClusterAssignmentRow {
    Date day;
    int cluster_id = 0;
    double distance = 0.0;
};

inline std::vector<ClusterAssignmentRow> read_clusters_csv(const std::string& path) {
    csv::Reader reader(path);
    reader.read_header({"day", "cluster_id", "distance_to_centroid"});
    std::vector<ClusterAssignmentRow> out;
    csv::Row row;
    while (reader.next(row)) {
        const std::string where = path + ":" + std::to_string(row.line_no);
        if (row.fields.size() != 3) throw DataError(where + ": expected 3 columns");
        ClusterAssignmentRow r;
        r.day = Date::parse(row.fields[0]);
        r.cluster_id = int(csv::parse_int(row.fields[1], where));
        r.distance = csv::parse_double(row.fields[2], where);
        out.push_back(r);
    }
    return out;
}

inline void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
    csv::Writer w(path);
    w.raw_line("k,silhouette,ws,flags");
    for (const auto& r : rows) {
        w.field(r.k).field(r.silhouette).field(r.ws).field(r.flags);
        w.end_row();
    }
}

inline void write_profiles_csv(const std::string& path,
                               const std::vector<ClusterProfile>& profiles) {
    csv::Writer w(path);
    w.raw_line(
        "cluster_id,typology,label,n_days,concentration,fraction_days_pct,"
        "avg_anomaly,avg_sched_flights,avg_cx_rate_pct,avg_arrd_per_flight");
    // Table rows run smooth to disrupted, like the reference layout.
    auto sorted = profiles;
    std::sort(sorted.begin(), sorted.end(),
              [](const ClusterProfile& a, const ClusterProfile& b) {
                  if (a.avg_anomaly != b.avg_anomaly) return a.avg_anomaly < b.avg_anomaly;
                  return a.cluster_id < b.cluster_id;
              });
    for (const auto& p : sorted) {
        w.field(p.cluster_id)
            .field(typology_name(p.typology))
            .field(p.label)
            .field(p.n_days)
            .field(p.concentration)
            .field(p.fraction_days_pct)
            .field(p.avg_anomaly)
            .field(p.avg_sched_flights)
            .field(p.avg_cx_rate_pct)
            .field(p.avg_arrd_per_flight);
        w.end_row();
    }
}

}  // namespace airdisrupt
