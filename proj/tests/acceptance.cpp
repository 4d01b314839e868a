// Acceptance suite: one pass/fail line per criterion, exit code equals the
// number of failed criteria. Everything here checks against independent
// oracles or planted ground truth on synthetic data.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "airdisrupt/pipeline.hpp"

using namespace airdisrupt;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), {});
}

// ---------------------------------------------------------------------------
// criterion 1: formula fidelity against a naive per-flight loop oracle
// ---------------------------------------------------------------------------

// Oracle metrics computed straight from timestamps, independent of the
// features module.
struct OracleCell {
    int64_t a = 0, d = 0, ca = 0, cd = 0;
    double dd_sum = 0, arrd_sum = 0, aird_sum = 0;
};

void criterion_formula_fidelity() {
    Rng rng(2024);
    const int n_groups = 5;
    std::vector<Airport> registry;
    std::vector<AirportGroup> groups;
    for (int g = 0; g < n_groups; ++g) {
        std::string code = "G" + std::to_string(g);
        registry.push_back({code, "Z" + std::to_string(g), 30.0 + g, -120.0 + 10.0 * g, true});
        AirportGroup ag;
        ag.group_id = code;
        ag.members = {code};
        ag.centroid_lon = -120.0 + 10.0 * g;
        groups.push_back(ag);
    }

    Date start = Date::parse("2023-04-01");
    const int n_days = 5;
    std::vector<FlightRecord> flights;
    for (int i = 0; i < 1000; ++i) {
        FlightRecord f;
        f.flight_id = "R" + std::to_string(i);
        int og = int(rng.uniform_index(n_groups));
        int dg = int(rng.uniform_index(n_groups - 1));
        if (dg >= og) ++dg;  // distinct airports
        f.origin = "G" + std::to_string(og);
        f.destination = "G" + std::to_string(dg);
        Date day = start.plus_days(int64_t(rng.uniform_index(n_days)));
        f.sched_dep = DateTime::from_parts(day, unsigned(rng.uniform_index(24)),
                                           unsigned(rng.uniform_index(60)));
        int duration = 60 + int(rng.uniform_index(300));
        f.sched_arr = f.sched_dep.plus_minutes(duration);
        if (rng.bernoulli(0.08)) {
            f.cancelled = true;
        } else {
            f.actual_dep = f.sched_dep.plus_minutes(int64_t(rng.uniform_index(90)) - 15);
            f.actual_arr = f.sched_arr.plus_minutes(int64_t(rng.uniform_index(120)) - 20);
            if (rng.bernoulli(0.9)) {
                int plan = duration - 30;
                f.plan_airborne_min = plan;
                f.wheels_off = f.actual_dep->plus_minutes(int64_t(rng.uniform_index(20)));
                f.wheels_on =
                    f.wheels_off->plus_minutes(plan + int64_t(rng.uniform_index(40)) - 10);
            }
        }
        flights.push_back(std::move(f));
    }

    auto t0 = std::chrono::steady_clock::now();

    std::vector<Date> days;
    for (int d = 0; d < n_days; ++d) days.push_back(start.plus_days(d));
    DayGroupTable table = aggregate(flights, days, groups, 2);

    // Naive oracle: one pass over flights, recomputing every delay from raw
    // timestamps with the max-with-zero rule.
    std::map<std::pair<int64_t, std::string>, OracleCell> cells;
    for (const auto& f : flights) {
        int64_t day = f.sched_dep.date().serial();
        auto touch = [&](const std::string& gid) -> OracleCell& {
            return cells[{day, gid}];
        };
        double dd = 0, arrd = 0, aird = 0;
        bool has_aird = false;
        if (!f.cancelled) {
            dd = std::max<double>(0.0, double(*f.actual_dep - f.sched_dep));
            arrd = std::max<double>(0.0, double(*f.actual_arr - f.sched_arr));
            if (f.wheels_off && f.wheels_on && f.plan_airborne_min) {
                aird = std::max(0.0, double(*f.wheels_on - *f.wheels_off) -
                                          double(*f.plan_airborne_min));
                has_aird = true;
            }
        }
        OracleCell& dep = touch(f.origin);
        ++dep.d;
        if (f.cancelled) {
            ++dep.cd;
        } else {
            dep.dd_sum += dd;
        }
        OracleCell& arr = touch(f.destination);
        ++arr.a;
        if (f.cancelled) {
            ++arr.ca;
        } else {
            arr.arrd_sum += arrd;
            if (has_aird) arr.aird_sum += aird;
        }
    }

    size_t mismatches = 0;
    for (size_t di = 0; di < days.size(); ++di) {
        for (size_t g = 0; g < groups.size(); ++g) {
            const DailyGroupMetrics& got = table.cells[di][g];
            OracleCell oc = cells[{days[di].serial(), table.group_order[g]}];
            double cx = oc.a + oc.d > 0 ? double(oc.ca + oc.cd) / double(oc.a + oc.d) : 0.0;
            double dd_avg = oc.d > 0 ? oc.dd_sum / double(oc.d) : 0.0;
            double arrd_avg = oc.a > 0 ? oc.arrd_sum / double(oc.a) : 0.0;
            double aird_avg = oc.a > 0 ? oc.aird_sum / double(oc.a) : 0.0;
            if (got.a != oc.a || got.d != oc.d || got.ca != oc.ca || got.cd != oc.cd ||
                got.cx != cx || got.dd_avg != dd_avg || got.arrd_avg != arrd_avg ||
                got.aird_avg != aird_avg) {
                ++mismatches;
            }
        }
    }
    double secs = elapsed_s(t0);
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "1000 flights, %zu day-group cells, %zu mismatches, %.3fs",
                  days.size() * groups.size(), mismatches, secs);
    report("formula-fidelity", mismatches == 0 && secs < 1.0, detail);
}

// ---------------------------------------------------------------------------
// criterion 2: calendar arithmetic and the manifest note
// ---------------------------------------------------------------------------

void criterion_calendar() {
    AnalysisWindow w = reference::production_window();
    auto days = enumerate_days(w);

    int64_t naive = 0;
    for (Date d = w.start; d <= w.end; d = d.next()) {
        if (!w.excluded(d)) ++naive;
    }
    auto notes = make_manifest_notes(w, days.size());
    bool note_ok = false;
    for (const auto& n : notes) {
        if (n.find("4839") != std::string::npos && n.find("4869") != std::string::npos) {
            note_ok = true;
        }
    }
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "enumerated %zu days (oracle %lld), discrepancy note present: %s",
                  days.size(), static_cast<long long>(naive), note_ok ? "yes" : "no");
    report("calendar", days.size() == 4839 && naive == 4839 && note_ok, detail);
}

// ---------------------------------------------------------------------------
// criterion 3: grouping fuzz against brute-force nearest hub
// ---------------------------------------------------------------------------

void criterion_grouping() {
    Rng rng(99);
    size_t violations = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Airport> registry;
        for (int i = 0; i < 200; ++i) {
            Airport a;
            a.code = "A" + std::to_string(trial) + "_" + std::to_string(i);
            a.artcc = "Z" + std::to_string(rng.uniform_index(22));
            a.lat = rng.uniform(25, 48);
            a.lon = rng.uniform(-124, -67);
            a.large_hub = rng.bernoulli(0.15);
            registry.push_back(std::move(a));
        }
        auto groups = group_airports(registry);

        std::map<std::string, int> membership_count;
        std::map<std::string, const AirportGroup*> group_of;
        for (const auto& g : groups) {
            if (g.members.empty()) ++violations;
            for (const auto& m : g.members) {
                ++membership_count[m];
                group_of[m] = &g;
            }
        }
        if (membership_count.size() != registry.size()) ++violations;
        for (const auto& [code, n] : membership_count) {
            if (n != 1) ++violations;
        }

        std::map<std::string, std::vector<const Airport*>> hubs;
        std::map<std::string, const Airport*> by_code;
        for (const auto& a : registry) {
            by_code[a.code] = &a;
            if (a.large_hub) hubs[a.artcc].push_back(&a);
        }
        for (const auto& a : registry) {
            const auto& artcc_hubs = hubs[a.artcc];
            if (a.large_hub || artcc_hubs.size() <= 1) continue;
            double best = std::numeric_limits<double>::infinity();
            for (const Airport* h : artcc_hubs) best = std::min(best, haversine_km(a, *h));
            const Airport* anchor = by_code[group_of[a.code]->anchor_hub];
            if (haversine_km(a, *anchor) != best) ++violations;
        }
    }
    char detail[96];
    std::snprintf(detail, sizeof(detail), "100 trials, %zu violations", violations);
    report("grouping", violations == 0, detail);
}

// ---------------------------------------------------------------------------
// criterion 4: pca properties on random standardized matrices
// ---------------------------------------------------------------------------

void criterion_pca() {
    double worst_trace = 0.0, worst_recon = 0.0, worst_round = 0.0;
    for (uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        Matrix z(200, 20);
        for (size_t r = 0; r < z.rows(); ++r) {
            for (size_t c = 0; c < z.cols(); ++c) z(r, c) = rng.normal();
        }
        for (size_t c = 0; c < z.cols(); ++c) {
            double mean = 0;
            for (size_t r = 0; r < z.rows(); ++r) mean += z(r, c);
            mean /= double(z.rows());
            double var = 0;
            for (size_t r = 0; r < z.rows(); ++r) var += (z(r, c) - mean) * (z(r, c) - mean);
            var /= double(z.rows());
            for (size_t r = 0; r < z.rows(); ++r) {
                z(r, c) = (z(r, c) - mean) / std::sqrt(var);
            }
        }

        PcaModel model = fit_pca(z);
        double sum = std::accumulate(model.eigenvalues.begin(), model.eigenvalues.end(), 0.0);
        worst_trace = std::max(worst_trace, std::fabs(sum - 20.0));

        // Independent covariance for the reconstruction check.
        for (size_t i = 0; i < 20; ++i) {
            for (size_t j = 0; j < 20; ++j) {
                double cov = 0;
                for (size_t r = 0; r < z.rows(); ++r) cov += z(r, i) * z(r, j);
                cov /= double(z.rows());
                double rebuilt = 0;
                for (size_t k = 0; k < model.eigenvalues.size(); ++k) {
                    rebuilt +=
                        model.eigenvalues[k] * model.loadings(k, i) * model.loadings(k, j);
                }
                worst_recon = std::max(worst_recon, std::fabs(rebuilt - cov));
            }
        }

        Matrix scores = project(model, z, int(model.n_components()));
        Matrix back = back_project(model, scores);
        for (size_t r = 0; r < z.rows(); ++r) {
            for (size_t c = 0; c < z.cols(); ++c) {
                worst_round = std::max(worst_round, std::fabs(back(r, c) - z(r, c)));
            }
        }
    }
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "|trace-20| max %.2e, recon max %.2e, round-trip max %.2e", worst_trace,
                  worst_recon, worst_round);
    report("pca", worst_trace < 1e-6 && worst_recon < 1e-6 && worst_round < 1e-8, detail);
}

// ---------------------------------------------------------------------------
// criterion 5: k-means on planted blobs
// ---------------------------------------------------------------------------

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    int ka = 1 + *std::max_element(a.begin(), a.end());
    int kb = 1 + *std::max_element(b.begin(), b.end());
    std::vector<std::vector<int64_t>> table(size_t(ka), std::vector<int64_t>(size_t(kb), 0));
    for (size_t i = 0; i < a.size(); ++i) ++table[size_t(a[i])][size_t(b[i])];
    auto choose2 = [](int64_t n) { return n * (n - 1) / 2; };
    int64_t sum_ij = 0;
    std::vector<int64_t> row_sum(size_t(ka), 0), col_sum(size_t(kb), 0);
    for (int i = 0; i < ka; ++i) {
        for (int j = 0; j < kb; ++j) {
            sum_ij += choose2(table[size_t(i)][size_t(j)]);
            row_sum[size_t(i)] += table[size_t(i)][size_t(j)];
            col_sum[size_t(j)] += table[size_t(i)][size_t(j)];
        }
    }
    int64_t sum_a = 0, sum_b = 0;
    for (int64_t v : row_sum) sum_a += choose2(v);
    for (int64_t v : col_sum) sum_b += choose2(v);
    double total = double(choose2(int64_t(a.size())));
    double expected = double(sum_a) * double(sum_b) / total;
    double max_index = 0.5 * double(sum_a + sum_b);
    return (double(sum_ij) - expected) / (max_index - expected);
}

void criterion_kmeans() {
    int ari_ok = 0, sweep_ok = 0;
    double min_ari = 1.0;
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed * 77);
        const double cx[3] = {0.0, 10.0, 5.0};
        const double cy[3] = {0.0, 0.0, 8.6602540378};  // pairwise distance 10
        Matrix pts(300, 2);
        std::vector<int> truth(300);
        for (size_t i = 0; i < 300; ++i) {
            int blob = int(i % 3);
            truth[i] = blob;
            pts(i, 0) = cx[blob] + rng.normal(0, 0.5);
            pts(i, 1) = cy[blob] + rng.normal(0, 0.5);
        }
        KMeansModel model = fit_kmeans(pts, 3, seed, 10);
        double ari = adjusted_rand_index(truth, model.assignments);
        min_ari = std::min(min_ari, ari);
        if (ari >= 0.95) ++ari_ok;

        auto sweep = sweep_k(pts, 2, 8, seed, 10);
        size_t best = 0;
        for (size_t i = 1; i < sweep.size(); ++i) {
            if (sweep[i].silhouette > sweep[best].silhouette) best = i;
        }
        if (sweep[best].k == 3 &&
            sweep[best].flags.find("silhouette-local-max") != std::string::npos) {
            ++sweep_ok;
        }
    }
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "ARI >= 0.95 in %d/20 seeds (min %.4f), k=3 flagged max in %d/20", ari_ok,
                  min_ari, sweep_ok);
    report("kmeans", ari_ok == 20 && sweep_ok >= 18, detail);
}

// ---------------------------------------------------------------------------
// criterion 6: isolation forest on planted outliers
// ---------------------------------------------------------------------------

void criterion_iforest() {
    double c_oracle = 2.0 * (std::log(255.0) + 0.5772156649) - 2.0 * 255.0 / 256.0;
    bool c_ok = std::fabs(average_path_length(256) - c_oracle) < 1e-9;

    int auc_ok = 0;
    double min_auc = 1.0;
    bool deterministic = true;
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed * 131);
        const size_t dims = 24, n_in = 1000, n_out = 10;
        Matrix pts(n_in + n_out, dims);
        for (size_t r = 0; r < n_in; ++r) {
            for (size_t c = 0; c < dims; ++c) pts(r, c) = rng.normal();
        }
        for (size_t r = n_in; r < n_in + n_out; ++r) {
            for (size_t c = 0; c < dims; ++c) pts(r, c) = rng.normal() + 8.0;
        }
        IsolationForestModel model = fit_iforest(pts, 100, 256, seed, 2);
        auto scores = anomaly_scores(model, pts, 2);

        if (seed == 1) {
            IsolationForestModel again = fit_iforest(pts, 100, 256, seed, 1);
            deterministic = anomaly_scores(again, pts, 1) == scores;
        }

        // Rank AUC of the planted block.
        std::vector<size_t> order(pts.rows());
        std::iota(order.begin(), order.end(), size_t(0));
        std::sort(order.begin(), order.end(),
                  [&](size_t x, size_t y) { return scores[x] < scores[y]; });
        double rank_sum = 0;
        for (size_t i = 0; i < order.size(); ++i) {
            if (order[i] >= n_in) rank_sum += double(i + 1);
        }
        double auc = (rank_sum - double(n_out) * double(n_out + 1) / 2.0) /
                     (double(n_out) * double(n_in));
        min_auc = std::min(min_auc, auc);
        if (auc >= 0.95) ++auc_ok;
    }
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "AUC >= 0.95 in %d/20 seeds (min %.4f), c(256) ok: %s, seed-stable: %s",
                  auc_ok, min_auc, c_ok ? "yes" : "no", deterministic ? "yes" : "no");
    report("iforest", auc_ok == 20 && c_ok && deterministic, detail);
}

// ---------------------------------------------------------------------------
// criterion 7: end-to-end on the bundled demo spec
// ---------------------------------------------------------------------------

void criterion_end_to_end() {
    fs::path out = fresh_dir("airdisrupt_accept_e2e");
    auto t0 = std::chrono::steady_clock::now();

    PipelineConfig cfg = load_config(AIRDISRUPT_DEMO_CONFIG, {}, out.string());
    // Demo paths are repo-relative; rebase them into the temp dir.
    json raw = cfg.raw;
    raw["paths"]["flights"] = (out / "flights.csv").string();
    raw["paths"]["airports"] = (out / "airports.csv").string();
    raw["paths"]["out"] = out.string();
    cfg = parse_config(raw);

    stage_synth(cfg);
    run_pipeline(cfg);
    double secs = elapsed_s(t0);

    // Ground truth from the demo spec: system-wide events touch all groups.
    std::set<int64_t> system_days, regional_days;
    for (const auto& ev : cfg.synth->events) {
        for (Date d : ev.days) {
            if (int(ev.groups.size()) == cfg.synth->n_groups) {
                system_days.insert(d.serial());
            } else {
                regional_days.insert(d.serial());
            }
        }
    }

    auto clusters = read_clusters_csv((out / "clusters.csv").string());
    auto anomaly = read_anomaly_csv((out / "anomaly.csv").string());

    // Highest-average-anomaly cluster.
    std::map<int, std::pair<double, size_t>> cluster_score;
    for (size_t i = 0; i < clusters.size(); ++i) {
        auto& [sum, n] = cluster_score[clusters[i].cluster_id];
        sum += anomaly[i].scaled;
        ++n;
    }
    int top_cluster = -1;
    double top_avg = -1.0;
    for (const auto& [cid, agg] : cluster_score) {
        double avg = agg.first / double(agg.second);
        if (avg > top_avg) {
            top_avg = avg;
            top_cluster = cid;
        }
    }
    size_t system_in_top = 0;
    for (size_t i = 0; i < clusters.size(); ++i) {
        if (system_days.count(clusters[i].day.serial()) &&
            clusters[i].cluster_id == top_cluster) {
            ++system_in_top;
        }
    }
    double system_frac = double(system_in_top) / double(system_days.size());

    // Regional days above the corpus p90 of scaled scores.
    std::vector<double> scaled;
    for (const auto& r : anomaly) scaled.push_back(r.scaled);
    std::vector<double> sorted = scaled;
    std::sort(sorted.begin(), sorted.end());
    double p90 = sorted[size_t(0.9 * double(sorted.size()))];
    size_t regional_above = 0;
    for (size_t i = 0; i < anomaly.size(); ++i) {
        if (regional_days.count(anomaly[i].day.serial()) && anomaly[i].scaled > p90) {
            ++regional_above;
        }
    }
    double regional_frac = double(regional_above) / double(regional_days.size());

    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "system days in top cluster %zu/%zu (%.0f%%), regional above p90 %zu/%zu "
                  "(%.0f%%), %.1fs",
                  system_in_top, system_days.size(), 100.0 * system_frac, regional_above,
                  regional_days.size(), 100.0 * regional_frac, secs);
    report("end-to-end", system_frac >= 0.75 && regional_frac >= 0.80 && secs < 60.0,
           detail);
}

// ---------------------------------------------------------------------------
// criterion 8: byte-identical runs through the CLI, any thread count
// ---------------------------------------------------------------------------

int run_cli(const std::string& args) {
    std::string cmd = std::string(AIRDISRUPT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    return std::system(cmd.c_str());
}

void criterion_determinism() {
    fs::path base = fresh_dir("airdisrupt_accept_det");
    fs::path out1 = base / "run1";
    fs::path out2 = base / "run2";

    json cfg;
    cfg["window"] = {{"start", "2023-01-01"}, {"end", "2023-08-18"}};
    cfg["kmeans"] = {{"k", 6}, {"restarts", 8}, {"seed", 5},
                     {"sweep_min", 2}, {"sweep_max", 8}};
    cfg["iforest"] = {{"trees", 60}, {"psi", 128}, {"seed", 9}};
    cfg["synth"] = {{"n_groups", 10},
                    {"days", 230},
                    {"start", "2023-01-01"},
                    {"baseline_flights_per_group_day", 10.0},
                    {"seed", 7},
                    {"events",
                     {{{"name", "blip"},
                       {"days", {"2023-04-10", "2023-04-11"}},
                       {"groups", {2, 3}},
                       {"cx_uplift", 0.2},
                       {"delay_uplift_min", 30.0}}}}};
    cfg["paths"] = {{"flights", (base / "flights.csv").string()},
                    {"airports", (base / "airports.csv").string()},
                    {"out", base.string()}};
    fs::path cfg_path = base / "config.json";
    std::ofstream(cfg_path) << cfg.dump(2);

    bool ok = run_cli("--config " + cfg_path.string() + " synth") == 0;
    ok = ok && run_cli("--config " + cfg_path.string() + " --out " + out1.string() +
                       " --threads 1 run") == 0;
    ok = ok && run_cli("--config " + cfg_path.string() + " --out " + out2.string() +
                       " --threads 2 run") == 0;

    size_t compared = 0, differing = 0;
    if (ok) {
        for (const auto& entry : fs::directory_iterator(out1)) {
            if (!entry.is_regular_file()) continue;
            std::string name = entry.path().filename().string();
            if (name == "run_manifest.json") continue;  // carries timings
            ++compared;
            if (!fs::exists(out2 / name) || read_file(entry.path()) != read_file(out2 / name)) {
                ++differing;
            }
        }
    }
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "cli runs ok: %s, %zu files compared across --threads 1 vs 2, %zu differ",
                  ok ? "yes" : "no", compared, differing);
    report("determinism", ok && compared >= 15 && differing == 0, detail);
}

}  // namespace

int main() {
    criterion_formula_fidelity();
    criterion_calendar();
    criterion_grouping();
    criterion_pca();
    criterion_kmeans();
    criterion_iforest();
    criterion_end_to_end();
    criterion_determinism();
    if (failures == 0) {
        std::printf("all acceptance criteria passed\n");
    } else {
        std::printf("%d acceptance criteria FAILED\n", failures);
    }
    return failures;
}
