#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "airdisrupt/calendar.hpp"
#include "airdisrupt/features.hpp"
#include "airdisrupt/flights.hpp"
#include "airdisrupt/geo.hpp"
#include "airdisrupt/iforest.hpp"
#include "airdisrupt/kmeans.hpp"
#include "airdisrupt/pca.hpp"
#include "airdisrupt/reference.hpp"
#include "airdisrupt/report.hpp"
#include "airdisrupt/sha256.hpp"
#include "airdisrupt/synth.hpp"

namespace airdisrupt {

using nlohmann::json;

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

struct PipelineConfig {
    struct Paths {
        std::string flights;
        std::string airports;
        std::string opsnet;  // optional day-level pass-through
        std::string out = "out";
    } paths;

    std::optional<AnalysisWindow> window;

    double pca_eigenvalue_threshold = 1.0;
    int pca_heatmap_components = 4;

    int kmeans_k = 12;
    int kmeans_restarts = 10;
    uint64_t kmeans_seed = 11;
    int sweep_min = 2;
    int sweep_max = 16;

    int iforest_trees = 100;
    int iforest_psi = 256;
    uint64_t iforest_seed = 17;

    TypologyThresholds typology;

    // "by-typology" keeps clusters typed Regional/NAS Disruption; an
    // explicit id list overrides it.
    std::vector<int> disrupted_clusters;
    bool disrupted_by_typology = true;

    int map_top_days = 3;
    std::vector<Date> map_days;
    bool emit_svg_maps = true;

    int threads = 1;

    std::optional<SyntheticSpec> synth;

    json raw;  // merged config as parsed, echoed into the manifest
};

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed,
                       const std::string& context) {
    if (!j.is_object()) throw ConfigError(context + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw ConfigError("unknown config key " + context + "." + it.key());
        }
    }
}

inline Date config_date(const json& j, const std::string& context) {
    if (!j.is_string()) throw ConfigError(context + " must be a \"YYYY-MM-DD\" string");
    try {
        return Date::parse(j.get<std::string>());
    } catch (const DataError& e) {
        throw ConfigError(context + ": " + e.what());
    }
}

inline AnalysisWindow parse_window(const json& j) {
    check_keys(j, {"start", "end", "exclusions"}, "window");
    if (!j.contains("start") || !j.contains("end")) {
        throw ConfigError("window needs start and end dates");
    }
    AnalysisWindow w;
    w.start = config_date(j.at("start"), "window.start");
    w.end = config_date(j.at("end"), "window.end");
    if (j.contains("exclusions")) {
        for (const auto& e : j.at("exclusions")) {
            if (!e.is_array() || e.size() != 2) {
                throw ConfigError("window.exclusions entries must be [start, end] pairs");
            }
            w.exclusions.push_back({config_date(e[0], "window.exclusions start"),
                                    config_date(e[1], "window.exclusions end")});
        }
    }
    w.validate();
    return w;
}

inline SyntheticSpec parse_synth(const json& j) {
    check_keys(j,
               {"n_groups", "days", "start", "baseline_flights_per_group_day",
                "base_cancel_rate", "base_dep_delay_mean_min", "seasonal_delay_amplitude",
                "seed", "events"},
               "synth");
    SyntheticSpec s;
    s.n_groups = j.value("n_groups", s.n_groups);
    s.days = j.value("days", s.days);
    if (j.contains("start")) s.start = config_date(j.at("start"), "synth.start");
    s.baseline_flights_per_group_day =
        j.value("baseline_flights_per_group_day", s.baseline_flights_per_group_day);
    s.base_cancel_rate = j.value("base_cancel_rate", s.base_cancel_rate);
    s.base_dep_delay_mean_min = j.value("base_dep_delay_mean_min", s.base_dep_delay_mean_min);
    s.seasonal_delay_amplitude =
        j.value("seasonal_delay_amplitude", s.seasonal_delay_amplitude);
    if (!j.contains("seed")) throw ConfigError("synth.seed must be explicit");
    s.seed = j.at("seed").get<uint64_t>();
    if (j.contains("events")) {
        for (const auto& e : j.at("events")) {
            check_keys(e, {"name", "days", "groups", "cx_uplift", "delay_uplift_min"},
                       "synth.events[]");
            DisruptionEvent ev;
            ev.name = e.value("name", std::string("event"));
            for (const auto& d : e.at("days")) {
                ev.days.push_back(config_date(d, "synth.events[].days"));
            }
            ev.groups = e.at("groups").get<std::vector<int>>();
            ev.cx_uplift = e.value("cx_uplift", 0.0);
            ev.delay_uplift_min = e.value("delay_uplift_min", 0.0);
            s.events.push_back(std::move(ev));
        }
    }
    return s;
}

// Applies one "--set a.b.c=value" override onto the raw config JSON.
// Values parse as JSON when possible and fall back to plain strings.
inline void apply_override(json& root, const std::string& kv) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("--set expects key=value, got \"" + kv + "\"");
    }
    std::string path = kv.substr(0, eq);
    std::string raw_value = kv.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw_value);
    } catch (const json::parse_error&) {
        value = raw_value;
    }
    json* node = &root;
    size_t start = 0;
    while (true) {
        size_t dot = path.find('.', start);
        std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (key.empty()) throw ConfigError("--set key has an empty segment: " + path);
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

}  // namespace detail

inline PipelineConfig parse_config(const json& merged) {
    detail::check_keys(merged,
                       {"paths", "window", "pca", "kmeans", "iforest", "typology",
                        "report", "threads", "synth"},
                       "config");
    PipelineConfig cfg;
    cfg.raw = merged;

    if (merged.contains("paths")) {
        const auto& p = merged.at("paths");
        detail::check_keys(p, {"flights", "airports", "opsnet", "out"}, "paths");
        cfg.paths.flights = p.value("flights", "");
        cfg.paths.airports = p.value("airports", "");
        cfg.paths.opsnet = p.value("opsnet", "");
        cfg.paths.out = p.value("out", cfg.paths.out);
    }
    if (merged.contains("window")) cfg.window = detail::parse_window(merged.at("window"));

    if (merged.contains("pca")) {
        const auto& p = merged.at("pca");
        detail::check_keys(p, {"eigenvalue_threshold", "heatmap_components"}, "pca");
        cfg.pca_eigenvalue_threshold =
            p.value("eigenvalue_threshold", cfg.pca_eigenvalue_threshold);
        cfg.pca_heatmap_components = p.value("heatmap_components", cfg.pca_heatmap_components);
    }
    if (merged.contains("kmeans")) {
        const auto& p = merged.at("kmeans");
        detail::check_keys(p, {"k", "restarts", "seed", "sweep_min", "sweep_max"}, "kmeans");
        cfg.kmeans_k = p.value("k", cfg.kmeans_k);
        cfg.kmeans_restarts = p.value("restarts", cfg.kmeans_restarts);
        cfg.kmeans_seed = p.value("seed", cfg.kmeans_seed);
        cfg.sweep_min = p.value("sweep_min", cfg.sweep_min);
        cfg.sweep_max = p.value("sweep_max", cfg.sweep_max);
    }
    if (merged.contains("iforest")) {
        const auto& p = merged.at("iforest");
        detail::check_keys(p, {"trees", "psi", "seed"}, "iforest");
        cfg.iforest_trees = p.value("trees", cfg.iforest_trees);
        cfg.iforest_psi = p.value("psi", cfg.iforest_psi);
        cfg.iforest_seed = p.value("seed", cfg.iforest_seed);
    }
    if (merged.contains("typology")) {
        const auto& p = merged.at("typology");
        detail::check_keys(p,
                           {"nas_cx_pct", "nas_cx_alt_pct", "nas_arrd_min",
                            "disruption_anomaly", "disturbance_anomaly"},
                           "typology");
        cfg.typology.nas_cx_pct = p.value("nas_cx_pct", cfg.typology.nas_cx_pct);
        cfg.typology.nas_cx_alt_pct = p.value("nas_cx_alt_pct", cfg.typology.nas_cx_alt_pct);
        cfg.typology.nas_arrd_min = p.value("nas_arrd_min", cfg.typology.nas_arrd_min);
        cfg.typology.disruption_anomaly =
            p.value("disruption_anomaly", cfg.typology.disruption_anomaly);
        cfg.typology.disturbance_anomaly =
            p.value("disturbance_anomaly", cfg.typology.disturbance_anomaly);
    }
    if (merged.contains("report")) {
        const auto& p = merged.at("report");
        detail::check_keys(p, {"disrupted_clusters", "map_top_days", "map_days", "svg_maps"},
                           "report");
        if (p.contains("disrupted_clusters")) {
            const auto& d = p.at("disrupted_clusters");
            if (d.is_string()) {
                if (d.get<std::string>() != "by-typology") {
                    throw ConfigError(
                        "report.disrupted_clusters must be \"by-typology\" or an id list");
                }
            } else {
                cfg.disrupted_by_typology = false;
                cfg.disrupted_clusters = d.get<std::vector<int>>();
            }
        }
        cfg.map_top_days = p.value("map_top_days", cfg.map_top_days);
        if (p.contains("map_days")) {
            for (const auto& d : p.at("map_days")) {
                cfg.map_days.push_back(detail::config_date(d, "report.map_days"));
            }
        }
        cfg.emit_svg_maps = p.value("svg_maps", cfg.emit_svg_maps);
    }
    cfg.threads = merged.value("threads", cfg.threads);
    if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
    if (merged.contains("synth")) cfg.synth = detail::parse_synth(merged.at("synth"));
    return cfg;
}

inline PipelineConfig load_config(const std::string& config_path,
                                  const std::vector<std::string>& overrides,
                                  const std::string& out_flag = "",
                                  int threads_flag = 0) {
    json merged = json::object();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("cannot open config file: " + config_path);
        try {
            in >> merged;
        } catch (const json::parse_error& e) {
            throw ConfigError("config " + config_path + ": " + e.what());
        }
    }
    for (const auto& kv : overrides) detail::apply_override(merged, kv);
    // Flags win over config file values.
    if (!out_flag.empty()) merged["paths"]["out"] = out_flag;
    if (threads_flag > 0) merged["threads"] = threads_flag;
    return parse_config(merged);
}

// ---------------------------------------------------------------------------
// stage plumbing
// ---------------------------------------------------------------------------

namespace fs = std::filesystem;

inline std::string out_path(const PipelineConfig& cfg, const std::string& name) {
    return (fs::path(cfg.paths.out) / name).string();
}

inline void ensure_out_dir(const PipelineConfig& cfg) {
    std::error_code ec;
    fs::create_directories(cfg.paths.out, ec);
    if (ec) throw ConfigError("cannot create output directory " + cfg.paths.out);
}

inline void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) throw ConfigError("config is missing a path for " + what);
    if (!fs::exists(path)) throw ConfigError(what + " file not found: " + path);
}

namespace detail {

template <typename Fn>
void run_stage(const char* stage, std::map<std::string, double>* timings_ms, Fn&& fn) {
    auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                         t0)
            .count();
    };
    auto tag = [&](const char* what) {
        return std::string("stage ") + stage + ": " + what;
    };
    try {
        fn();
    } catch (const ConfigError& e) {
        throw ConfigError(tag(e.what()));
    } catch (const DataError& e) {
        throw DataError(tag(e.what()));
    } catch (const NumericError& e) {
        throw NumericError(tag(e.what()));
    } catch (const std::exception& e) {
        throw DataError(tag(e.what()));
    }
    if (timings_ms) (*timings_ms)[stage] = elapsed();
}

inline double quantile_of(std::vector<double> values, double p) {
    std::sort(values.begin(), values.end());
    return quantile_sorted(values, p);
}

}  // namespace detail

// Notes surfaced in the run manifest. When the configured window is the
// full-scale production window, the computed day count is compared with
// the published reference figure.
inline std::vector<std::string> make_manifest_notes(const AnalysisWindow& window,
                                                    size_t n_days) {
    std::vector<std::string> notes;
    notes.push_back("analysis window " + window.start.to_string() + ".." +
                    window.end.to_string() + " covers " + std::to_string(n_days) +
                    " days after " + std::to_string(window.exclusions.size()) +
                    " exclusion range(s)");
    AnalysisWindow ref = reference::production_window();
    bool same = window.start == ref.start && window.end == ref.end &&
                window.exclusions.size() == ref.exclusions.size();
    if (same) {
        for (size_t i = 0; i < ref.exclusions.size(); ++i) {
            same = same && window.exclusions[i].start == ref.exclusions[i].start &&
                   window.exclusions[i].end == ref.exclusions[i].end;
        }
    }
    if (same && int(n_days) != reference::kPublishedDayCount) {
        notes.push_back("window matches the published 2010-2024 reference window: "
                        "computed " +
                        std::to_string(n_days) + " days, published count is " +
                        std::to_string(reference::kPublishedDayCount) +
                        " (difference " +
                        std::to_string(reference::kPublishedDayCount - int(n_days)) + ")");
    }
    return notes;
}

// ---------------------------------------------------------------------------
// individual stages (each re-runnable from its predecessor's files)
// ---------------------------------------------------------------------------

inline void stage_synth(const PipelineConfig& cfg) {
    if (!cfg.synth) throw ConfigError("config has no synth section");
    ensure_out_dir(cfg);
    SyntheticCorpus corpus = generate_synthetic(*cfg.synth);
    write_flights(out_path(cfg, "flights.csv"), corpus.flights);
    write_airports(out_path(cfg, "airports.csv"), corpus.airports);
    write_labels_csv(out_path(cfg, "labels.csv"), corpus.labels, corpus.group_ids);
}

inline json stage_ingest(const PipelineConfig& cfg, std::vector<FlightRecord>* out_flights) {
    require_file(cfg.paths.flights, "flights");
    std::vector<FlightRecord> flights = parse_flights(cfg.paths.flights);
    if (flights.empty()) throw DataError("flights file has no rows: " + cfg.paths.flights);

    size_t cancelled = 0;
    Date first = day_of(flights.front()), last = first;
    for (const auto& f : flights) {
        if (f.cancelled) ++cancelled;
        Date d = day_of(f);
        first = std::min(first, d);
        last = std::max(last, d);
    }
    // Exact duplicate raw rows are only reported, never dropped.
    size_t duplicates = 0;
    {
        std::ifstream in(cfg.paths.flights);
        std::unordered_set<std::string> seen;
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (!line.empty() && !seen.insert(line).second) ++duplicates;
        }
    }
    json summary;
    summary["records"] = flights.size();
    summary["cancelled"] = cancelled;
    summary["duplicate_rows"] = duplicates;
    summary["first_day"] = first.to_string();
    summary["last_day"] = last.to_string();
    if (out_flights) *out_flights = std::move(flights);
    return summary;
}

inline std::vector<AirportGroup> stage_group(const PipelineConfig& cfg) {
    require_file(cfg.paths.airports, "airports");
    auto groups = group_airports(read_airports(cfg.paths.airports));
    ensure_out_dir(cfg);
    write_groups(out_path(cfg, "groups.csv"), groups);
    return groups;
}

struct FeaturizeResult {
    std::vector<Date> days;
    DayGroupTable table;
    FeatureMatrix raw_matrix;
};

inline FeaturizeResult stage_featurize(const PipelineConfig& cfg,
                                       const std::vector<FlightRecord>& flights,
                                       const std::vector<AirportGroup>& groups) {
    if (!cfg.window) throw ConfigError("config needs a window for featurize");
    FeaturizeResult res;
    res.days = enumerate_days(*cfg.window);
    res.table = aggregate(flights, res.days, groups, cfg.threads);
    res.raw_matrix = build_matrix(res.table);
    ensure_out_dir(cfg);
    write_features_csv(out_path(cfg, "features.csv"), res.table);
    write_matrix_csv(out_path(cfg, "matrix.csv"), res.raw_matrix);
    write_day_stats_csv(out_path(cfg, "day_stats.csv"), res.table.nas);
    return res;
}

struct PcaStageResult {
    FeatureMatrix z;
    PcaModel model;
    Matrix scores;
};

inline PcaStageResult stage_pca(const PipelineConfig& cfg, const FeatureMatrix& raw,
                                const std::vector<std::string>& group_order) {
    PcaStageResult res;
    res.z = standardize(raw);
    res.model = fit_pca(res.z);
    select_components(res.model, cfg.pca_eigenvalue_threshold);
    res.scores = project(res.model, res.z.values, res.model.n_selected, cfg.threads);

    ensure_out_dir(cfg);
    json j;
    j["eigenvalues"] = res.model.eigenvalues;
    j["explained_ratio"] = res.model.explained_ratio;
    j["n_selected"] = res.model.n_selected;
    j["selection_fallback"] = res.model.selection_fallback;
    j["selected_cumulative_ratio"] = res.model.selected_cumulative_ratio;
    j["eigenvalue_threshold"] = cfg.pca_eigenvalue_threshold;
    std::vector<std::string> labels;
    for (const auto& c : res.z.columns) labels.push_back(c.label());
    j["columns"] = labels;
    std::vector<std::vector<double>> loadings;
    for (size_t r = 0; r < res.model.loadings.rows(); ++r) {
        loadings.emplace_back(res.model.loadings.row_ptr(r),
                              res.model.loadings.row_ptr(r) + res.model.loadings.cols());
    }
    j["loadings"] = loadings;
    std::ofstream(out_path(cfg, "pca.json")) << j.dump(2) << '\n';

    write_scores_csv(out_path(cfg, "scores.csv"), res.z.days, res.scores);

    int k_heat = std::min(cfg.pca_heatmap_components, res.model.n_selected);
    auto tables = loadings_heatmap_data(res.model, res.z.columns, group_order, k_heat);
    for (const auto& t : tables) {
        write_heatmap_csv(out_path(cfg, "heatmap_pc" + std::to_string(t.component) + ".csv"),
                          t);
    }
    return res;
}

struct ClusterStageResult {
    KMeansModel model;
    std::vector<SweepRow> sweep;
};

inline ClusterStageResult stage_cluster(const PipelineConfig& cfg,
                                        const std::vector<Date>& days,
                                        const Matrix& scores) {
    if (cfg.kmeans_k < 2) {
        throw ConfigError("kmeans.k must be >= 2 (sweep/silhouette precondition)");
    }
    ClusterStageResult res;
    res.model = fit_kmeans(scores, cfg.kmeans_k, cfg.kmeans_seed, cfg.kmeans_restarts,
                           cfg.threads);
    int sweep_hi = int(std::min<size_t>(size_t(cfg.sweep_max), scores.rows()));
    res.sweep = sweep_k(scores, cfg.sweep_min, sweep_hi, cfg.kmeans_seed,
                        cfg.kmeans_restarts, cfg.threads);
    ensure_out_dir(cfg);
    write_clusters_csv(out_path(cfg, "clusters.csv"), days, scores, res.model);
    write_sweep_csv(out_path(cfg, "sweep.csv"), res.sweep);
    return res;
}

struct ScoreStageResult {
    IsolationForestModel model;
    std::vector<double> raw;
    std::vector<double> scaled;
    bool scale_degenerate = false;
};

inline ScoreStageResult stage_score(const PipelineConfig& cfg, const std::vector<Date>& days,
                                    const Matrix& scores) {
    ScoreStageResult res;
    res.model = fit_iforest(scores, cfg.iforest_trees, cfg.iforest_psi, cfg.iforest_seed,
                            cfg.threads);
    res.raw = anomaly_scores(res.model, scores, cfg.threads);
    ScaledScores scaled = scale_scores(res.raw);
    res.scaled = std::move(scaled.values);
    res.scale_degenerate = scaled.degenerate;

    ensure_out_dir(cfg);
    write_anomaly_csv(out_path(cfg, "anomaly.csv"), days, res.raw, res.scaled);
    std::ofstream(out_path(cfg, "iforest.json")) << iforest_to_json(res.model).dump() << '\n';
    return res;
}

// ---------------------------------------------------------------------------
// report stage
// ---------------------------------------------------------------------------

struct ReportInputs {
    std::vector<Date> days;
    std::vector<int> assignments;
    std::vector<double> centroid_distance;
    int k = 0;
    std::vector<double> raw_scores;
    std::vector<double> scaled_scores;
    std::vector<NasDayStats> day_stats;
    DayGroupTable table;  // per (day, group) aggregates for maps
    std::vector<AirportGroup> groups;
    // Geography for typology label tags (optional).
    const FeatureMatrix* z = nullptr;
    std::optional<std::map<int64_t, double>> opsnet;
};

struct ReportResult {
    std::vector<ClusterProfile> profiles;
    std::vector<DayRecord> records;
    std::vector<int> disrupted;
};

inline ReportResult stage_report(const PipelineConfig& cfg, const ReportInputs& in) {
    const size_t n = in.days.size();
    if (in.assignments.size() != n || in.raw_scores.size() != n ||
        in.scaled_scores.size() != n || in.day_stats.size() != n) {
        throw DataError("report inputs are not aligned on days");
    }

    auto profiles = profile_clusters(in.assignments, in.centroid_distance, in.k,
                                     in.day_stats, in.scaled_scores);

    GeoTagContext geo;
    const GeoTagContext* geo_ptr = nullptr;
    if (in.z != nullptr) {
        geo.columns = in.z->columns;
        geo.group_order = in.table.group_order;
        geo.cluster_mean_z = Matrix(size_t(in.k), in.z->values.cols());
        std::vector<size_t> counts(size_t(in.k), 0);
        for (size_t r = 0; r < n; ++r) {
            size_t c = size_t(in.assignments[r]);
            ++counts[c];
            for (size_t f = 0; f < in.z->values.cols(); ++f) {
                geo.cluster_mean_z(c, f) += in.z->values(r, f);
            }
        }
        for (size_t c = 0; c < size_t(in.k); ++c) {
            if (counts[c] == 0) continue;
            for (size_t f = 0; f < in.z->values.cols(); ++f) {
                geo.cluster_mean_z(c, f) /= double(counts[c]);
            }
        }
        geo_ptr = &geo;
    }
    classify_typology(profiles, cfg.typology, geo_ptr);

    auto records = assemble_day_records(in.days, in.assignments, profiles, in.raw_scores,
                                        in.scaled_scores, in.day_stats,
                                        in.opsnet ? &*in.opsnet : nullptr);

    // Disrupted cluster set: explicit config list, else typed clusters.
    std::vector<int> disrupted;
    if (!cfg.disrupted_by_typology) {
        disrupted = cfg.disrupted_clusters;
    } else {
        for (const auto& p : profiles) {
            if (p.typology == Typology::RegionalDisruption ||
                p.typology == Typology::NASDisruption) {
                disrupted.push_back(p.cluster_id);
            }
        }
    }
    std::sort(disrupted.begin(), disrupted.end());

    auto cdf = score_cdf_by_cluster(records);
    auto boxes = boxplot_stats_by_cluster(records);
    auto trends_year = trend_ratios(records, disrupted, TrendBucket::Year);
    auto trends_month = trend_ratios(records, disrupted, TrendBucket::Month);

    // Shares cumulate from the most disrupted cluster (by avg anomaly) down.
    std::vector<int> share_order;
    {
        auto sorted = profiles;
        std::sort(sorted.begin(), sorted.end(),
                  [](const ClusterProfile& a, const ClusterProfile& b) {
                      if (a.avg_anomaly != b.avg_anomaly) return a.avg_anomaly > b.avg_anomaly;
                      return a.cluster_id < b.cluster_id;
                  });
        for (const auto& p : sorted) share_order.push_back(p.cluster_id);
    }
    auto shares = cumulative_metric_shares(records, share_order);

    // Representative days: explicit config days plus the top scaled scores.
    std::vector<Date> map_days = cfg.map_days;
    {
        std::vector<size_t> order(n);
        for (size_t i = 0; i < n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            if (in.scaled_scores[a] != in.scaled_scores[b]) {
                return in.scaled_scores[a] > in.scaled_scores[b];
            }
            return in.days[a] < in.days[b];
        });
        for (int i = 0; i < cfg.map_top_days && size_t(i) < n; ++i) {
            Date d = in.days[order[size_t(i)]];
            if (std::find(map_days.begin(), map_days.end(), d) == map_days.end()) {
                map_days.push_back(d);
            }
        }
    }

    ensure_out_dir(cfg);
    write_profiles_csv(out_path(cfg, "profiles.csv"), profiles);
    write_cdf_csv(out_path(cfg, "cdf.csv"), cdf);
    write_boxplots_csv(out_path(cfg, "boxplots.csv"), boxes);
    write_trends_csv(out_path(cfg, "trends_year.csv"), trends_year, disrupted);
    write_trends_csv(out_path(cfg, "trends_month.csv"), trends_month, disrupted);
    write_shares_csv(out_path(cfg, "shares.csv"), shares);

    json maps_json = json::object();
    for (Date d : map_days) {
        auto points = day_map(in.table, d, in.groups);
        write_map_csv(out_path(cfg, "map_" + d.to_string() + ".csv"), points);
        if (cfg.emit_svg_maps) {
            write_map_svg(out_path(cfg, "map_" + d.to_string() + ".svg"), d, points);
        }
        json arr = json::array();
        for (const auto& p : points) {
            arr.push_back({{"group", p.group_id},
                           {"lat", p.lat},
                           {"lon", p.lon},
                           {"cx", p.cx},
                           {"arrd_avg", p.arrd_avg},
                           {"size_norm", p.size_norm},
                           {"color_norm", p.color_norm}});
        }
        maps_json[d.to_string()] = std::move(arr);
    }

    json j;
    j["k"] = in.k;
    j["typology_thresholds"] = {{"nas_cx_pct", cfg.typology.nas_cx_pct},
                                {"nas_cx_alt_pct", cfg.typology.nas_cx_alt_pct},
                                {"nas_arrd_min", cfg.typology.nas_arrd_min},
                                {"disruption_anomaly", cfg.typology.disruption_anomaly},
                                {"disturbance_anomaly", cfg.typology.disturbance_anomaly},
                                {"note", "heuristic rule thresholds, config-exposed"}};
    json jprof = json::array();
    for (const auto& p : profiles) {
        jprof.push_back({{"cluster_id", p.cluster_id},
                         {"typology", typology_name(p.typology)},
                         {"label", p.label},
                         {"n_days", p.n_days},
                         {"concentration", p.concentration},
                         {"fraction_days_pct", p.fraction_days_pct},
                         {"avg_anomaly", p.avg_anomaly},
                         {"avg_sched_flights", p.avg_sched_flights},
                         {"avg_cx_rate_pct", p.avg_cx_rate_pct},
                         {"avg_arrd_per_flight", p.avg_arrd_per_flight}});
    }
    j["profiles"] = std::move(jprof);
    j["disrupted_clusters"] = disrupted;
    {
        std::vector<double> s = in.scaled_scores;
        size_t max_i = 0;
        for (size_t i = 1; i < n; ++i) {
            if (in.scaled_scores[i] > in.scaled_scores[max_i]) max_i = i;
        }
        j["anomaly_summary"] = {{"median", detail::quantile_of(s, 0.5)},
                                {"p95", detail::quantile_of(s, 0.95)},
                                {"p99", detail::quantile_of(s, 0.99)},
                                {"max_day", in.days[max_i].to_string()}};
    }
    json jcdf = json::array();
    for (const auto& r : cdf) {
        jcdf.push_back({{"day", r.day.to_string()},
                        {"scaled_score", r.scaled_score},
                        {"cum_fraction", r.cum_fraction},
                        {"cluster_id", r.cluster_id}});
    }
    j["cdf"] = std::move(jcdf);
    json jbox = json::array();
    for (const auto& b : boxes) {
        json outliers = json::array();
        for (const auto& [day, s] : b.outliers) {
            outliers.push_back({{"day", day.to_string()}, {"score", s}});
        }
        jbox.push_back({{"cluster_id", b.cluster_id},
                        {"n", b.n},
                        {"min", b.min},
                        {"q1", b.q1},
                        {"median", b.median},
                        {"q3", b.q3},
                        {"max", b.max},
                        {"mean", b.mean},
                        {"outliers", std::move(outliers)}});
    }
    j["boxplots"] = std::move(jbox);
    auto trends_to_json = [](const std::vector<TrendRow>& rows) {
        json arr = json::array();
        for (const auto& r : rows) {
            json pc = json::object();
            for (const auto& [cid, count] : r.per_cluster) {
                pc[std::to_string(cid)] = count;
            }
            arr.push_back({{"bucket", r.bucket},
                           {"days_total", r.days_total},
                           {"days_disrupted", r.days_disrupted},
                           {"ratio", r.ratio},
                           {"per_cluster_days", std::move(pc)}});
        }
        return arr;
    };
    j["trends_year"] = trends_to_json(trends_year);
    j["trends_month"] = trends_to_json(trends_month);
    {
        json sj;
        sj["metrics"] = shares.metrics;
        sj["cluster_order"] = shares.cluster_order;
        sj["share_pct"] = shares.share_pct;
        sj["cumulative_pct"] = shares.cumulative_pct;
        j["shares"] = std::move(sj);
    }
    j["maps"] = std::move(maps_json);
    std::ofstream(out_path(cfg, "report.json")) << j.dump(2) << '\n';

    ReportResult res;
    res.profiles = std::move(profiles);
    res.records = std::move(records);
    res.disrupted = std::move(disrupted);
    return res;
}

// Loads every report input from the predecessor stages' files.
inline ReportInputs load_report_inputs(const PipelineConfig& cfg) {
    ReportInputs in;
    auto clusters = read_clusters_csv(out_path(cfg, "clusters.csv"));
    for (const auto& r : clusters) {
        in.days.push_back(r.day);
        in.assignments.push_back(r.cluster_id);
        in.centroid_distance.push_back(r.distance);
        in.k = std::max(in.k, r.cluster_id + 1);
    }
    auto anomaly = read_anomaly_csv(out_path(cfg, "anomaly.csv"));
    if (anomaly.size() != in.days.size()) {
        throw DataError("anomaly.csv and clusters.csv disagree on day count");
    }
    for (size_t i = 0; i < anomaly.size(); ++i) {
        if (anomaly[i].day != in.days[i]) {
            throw DataError("anomaly.csv and clusters.csv disagree on day order");
        }
        in.raw_scores.push_back(anomaly[i].raw);
        in.scaled_scores.push_back(anomaly[i].scaled);
    }
    in.day_stats = read_day_stats_csv(out_path(cfg, "day_stats.csv"));
    in.table = read_features_csv(out_path(cfg, "features.csv"));
    in.groups = read_groups(out_path(cfg, "groups.csv"));
    if (!cfg.paths.opsnet.empty()) {
        require_file(cfg.paths.opsnet, "opsnet");
        in.opsnet = read_opsnet_csv(cfg.paths.opsnet);
    }
    return in;
}

// ---------------------------------------------------------------------------
// end-to-end run
// ---------------------------------------------------------------------------

inline json environment_fingerprint() {
    json env;
#if defined(__VERSION__)
    env["compiler"] = __VERSION__;
#else
    env["compiler"] = "unknown";
#endif
    env["cpp_standard"] = long(__cplusplus);
    env["pointer_bits"] = int(sizeof(void*) * 8);
    uint16_t probe = 1;
    env["endianness"] = (*reinterpret_cast<uint8_t*>(&probe) == 1) ? "little" : "big";
    return env;
}

// Runs corpus -> geo -> features -> pca -> kmeans -> iforest -> report and
// writes run_manifest.json. On a stage failure, partial outputs move into
// <out>/failed/ and the error is rethrown tagged with the stage name.
inline void run_pipeline(const PipelineConfig& cfg) {
    ensure_out_dir(cfg);
    std::map<std::string, double> timings;

    try {
        std::vector<FlightRecord> flights;
        json ingest_summary;
        detail::run_stage("ingest", &timings, [&] {
            ingest_summary = stage_ingest(cfg, &flights);
            std::ofstream(out_path(cfg, "ingest.json")) << ingest_summary.dump(2) << '\n';
        });

        std::vector<AirportGroup> groups;
        detail::run_stage("group", &timings, [&] { groups = stage_group(cfg); });

        FeaturizeResult feat;
        detail::run_stage("featurize", &timings,
                          [&] { feat = stage_featurize(cfg, flights, groups); });

        PcaStageResult pca;
        detail::run_stage("pca", &timings,
                          [&] { pca = stage_pca(cfg, feat.raw_matrix, feat.table.group_order); });

        ClusterStageResult cluster;
        detail::run_stage("cluster", &timings,
                          [&] { cluster = stage_cluster(cfg, feat.days, pca.scores); });

        ScoreStageResult score;
        detail::run_stage("score", &timings,
                          [&] { score = stage_score(cfg, feat.days, pca.scores); });

        detail::run_stage("report", &timings, [&] {
            ReportInputs in;
            in.days = feat.days;
            in.assignments = cluster.model.assignments;
            in.centroid_distance = centroid_distances(pca.scores, cluster.model);
            in.k = cluster.model.k;
            in.raw_scores = score.raw;
            in.scaled_scores = score.scaled;
            in.day_stats = feat.table.nas;
            in.table = feat.table;
            in.groups = groups;
            in.z = &pca.z;
            if (!cfg.paths.opsnet.empty()) {
                require_file(cfg.paths.opsnet, "opsnet");
                in.opsnet = read_opsnet_csv(cfg.paths.opsnet);
            }
            stage_report(cfg, in);
        });

        json manifest;
        manifest["config"] = cfg.raw;
        json inputs = json::object();
        inputs["flights"] = {{"path", cfg.paths.flights},
                             {"sha256", Sha256::of_file(cfg.paths.flights)}};
        inputs["airports"] = {{"path", cfg.paths.airports},
                              {"sha256", Sha256::of_file(cfg.paths.airports)}};
        if (!cfg.paths.opsnet.empty()) {
            inputs["opsnet"] = {{"path", cfg.paths.opsnet},
                                {"sha256", Sha256::of_file(cfg.paths.opsnet)}};
        }
        manifest["inputs"] = std::move(inputs);
        manifest["ingest"] = ingest_summary;
        manifest["environment"] = environment_fingerprint();
        manifest["stage_timings_ms"] = timings;
        manifest["notes"] = make_manifest_notes(*cfg.window, feat.days.size());
        std::ofstream(out_path(cfg, "run_manifest.json")) << manifest.dump(2) << '\n';
    } catch (...) {
        // Keep whatever was produced, but clearly marked as a failed run.
        // Input files that happen to live in the output directory stay put.
        std::error_code ec;
        auto same_file = [&](const fs::path& p, const std::string& q) {
            return !q.empty() && fs::equivalent(p, q, ec);
        };
        fs::path failed = fs::path(cfg.paths.out) / "failed";
        fs::create_directories(failed, ec);
        if (!ec) {
            for (const auto& entry : fs::directory_iterator(cfg.paths.out, ec)) {
                if (!entry.is_regular_file()) continue;
                if (same_file(entry.path(), cfg.paths.flights) ||
                    same_file(entry.path(), cfg.paths.airports) ||
                    same_file(entry.path(), cfg.paths.opsnet)) {
                    continue;
                }
                fs::rename(entry.path(), failed / entry.path().filename(), ec);
            }
        }
        throw;
    }
}

}  // namespace airdisrupt
