#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include "airdisrupt/report.hpp"
#include "airdisrupt/rng.hpp"

using namespace airdisrupt;

namespace {

std::vector<DayRecord> make_records(const std::vector<double>& scores,
                                    const std::vector<int>& clusters) {
    std::vector<DayRecord> records(scores.size());
    Date d0 = Date::parse("2023-01-01");
    for (size_t i = 0; i < scores.size(); ++i) {
        records[i].day = d0.plus_days(int64_t(i));
        records[i].cluster_id = clusters[i];
        records[i].scaled_score = scores[i];
        records[i].raw_score = scores[i] * 0.6 + 0.2;
        records[i].stats.flights_total = 100;
        records[i].stats.cancelled = 2;
        records[i].stats.cx_rate = 0.02;
        records[i].stats.total_arrd_min = 500;
        records[i].stats.total_dd_min = 400;
        records[i].stats.total_aird_min = 100;
    }
    return records;
}

}  // namespace

TEST_CASE("score CDF is sorted with exact cumulative fractions") {
    auto records = make_records({0.3, 0.1, 0.4, 0.2}, {0, 0, 1, 1});
    auto cdf = score_cdf_by_cluster(records);
    REQUIRE(cdf.size() == 4);
    CHECK(cdf[0].scaled_score == 0.1);
    CHECK(cdf[0].cum_fraction == 0.25);
    CHECK(cdf[1].cum_fraction == 0.5);
    CHECK(cdf[2].cum_fraction == 0.75);
    CHECK(cdf[3].cum_fraction == 1.0);
    CHECK(cdf[3].scaled_score == 0.4);
    CHECK(cdf[3].cluster_id == 1);
    CHECK(std::is_sorted(cdf.begin(), cdf.end(), [](const CdfRow& a, const CdfRow& b) {
        return a.scaled_score < b.scaled_score;
    }));
}

TEST_CASE("boxplot five-number summaries use interpolated quantiles") {
    auto records = make_records({1, 2, 3, 4, 5}, {0, 0, 0, 0, 0});
    // Need two clusters for downstream code paths? boxplots alone accept one.
    auto rows = boxplot_stats_by_cluster(records);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].min == 1.0);
    CHECK(rows[0].q1 == 2.0);
    CHECK(rows[0].median == 3.0);
    CHECK(rows[0].q3 == 4.0);
    CHECK(rows[0].max == 5.0);
    CHECK(rows[0].outliers.empty());

    SECTION("single-member cluster collapses to one value") {
        auto one = make_records({0.42}, {0});
        auto r = boxplot_stats_by_cluster(one);
        REQUIRE(r.size() == 1);
        CHECK(r[0].min == 0.42);
        CHECK(r[0].q1 == 0.42);
        CHECK(r[0].median == 0.42);
        CHECK(r[0].q3 == 0.42);
        CHECK(r[0].max == 0.42);
    }

    SECTION("far point lands on the outlier list") {
        auto recs = make_records({0.10, 0.11, 0.12, 0.13, 0.14, 0.15, 0.16, 0.95}, {0, 0, 0, 0, 0, 0, 0, 0});
        auto r = boxplot_stats_by_cluster(recs);
        REQUIRE(r.size() == 1);
        REQUIRE(r[0].outliers.size() == 1);
        CHECK(r[0].outliers[0].second == 0.95);
    }

    SECTION("clusters are ordered smooth to disrupted") {
        auto recs = make_records({0.9, 0.8, 0.1, 0.2}, {0, 0, 1, 1});
        auto r = boxplot_stats_by_cluster(recs);
        REQUIRE(r.size() == 2);
        CHECK(r[0].cluster_id == 1);
        CHECK(r[1].cluster_id == 0);
    }

    SECTION("quantiles match a sort-based oracle on random inputs") {
        Rng rng(8);
        std::vector<double> values(37);
        for (auto& v : values) v = rng.uniform01();
        std::vector<int> zeros(values.size(), 0);
        auto r = boxplot_stats_by_cluster(make_records(values, zeros));
        std::sort(values.begin(), values.end());
        auto oracle = [&](double p) {
            double h = double(values.size() - 1) * p;
            size_t i = size_t(h);
            if (i + 1 >= values.size()) return values.back();
            return values[i] + (h - double(i)) * (values[i + 1] - values[i]);
        };
        CHECK_THAT(r[0].q1, Catch::Matchers::WithinAbs(oracle(0.25), 1e-12));
        CHECK_THAT(r[0].median, Catch::Matchers::WithinAbs(oracle(0.5), 1e-12));
        CHECK_THAT(r[0].q3, Catch::Matchers::WithinAbs(oracle(0.75), 1e-12));
    }
}

TEST_CASE("day maps carry fixed-scale encodings") {
    DayGroupTable table;
    table.days = {Date::parse("2023-06-01")};
    table.group_order = {"A", "B"};
    table.cells.assign(1, std::vector<DailyGroupMetrics>(2));
    table.cells[0][1].cx = 0.25;
    table.cells[0][1].arrd_avg = 30.0;

    std::vector<AirportGroup> groups(2);
    groups[0].group_id = "A";
    groups[0].centroid_lat = 40;
    groups[0].centroid_lon = -100;
    groups[1].group_id = "B";
    groups[1].centroid_lat = 35;
    groups[1].centroid_lon = -80;

    auto points = day_map(table, Date::parse("2023-06-01"), groups);
    REQUIRE(points.size() == 2);
    CHECK(points[0].size_norm == 0.0);   // cx = 0 -> minimum size
    CHECK(points[0].color_norm == 0.0);  // no delay -> neutral color
    CHECK(points[1].size_norm == 0.5);   // 0.25 on the fixed 0..0.5 scale
    CHECK(points[1].color_norm == 0.5);  // 30 min on the fixed 0..60 scale
    CHECK(points[1].lat == 35);

    SECTION("identical aggregates give identical tables") {
        auto again = day_map(table, Date::parse("2023-06-01"), groups);
        for (size_t i = 0; i < points.size(); ++i) {
            CHECK(points[i].size_norm == again[i].size_norm);
            CHECK(points[i].color_norm == again[i].color_norm);
        }
    }

    SECTION("unknown day is an error") {
        CHECK_THROWS_AS(day_map(table, Date::parse("2024-01-01"), groups), DataError);
    }

    SECTION("svg emitter writes a plausible document") {
        auto path = (std::filesystem::temp_directory_path() / "map_test.svg").string();
        write_map_svg(path, Date::parse("2023-06-01"), points);
        std::ifstream in(path);
        std::string content((std::istreambuf_iterator<char>(in)), {});
        CHECK(content.find("<svg") != std::string::npos);
        CHECK(content.find("circle") != std::string::npos);
        CHECK(content.find("2023-06-01") != std::string::npos);
    }
}

TEST_CASE("trend ratios per year and pooled month") {
    // Ten days in one year, one disrupted.
    auto records = make_records(std::vector<double>(10, 0.1),
                                {0, 0, 0, 0, 0, 0, 0, 0, 0, 1});
    auto rows = trend_ratios(records, {1}, TrendBucket::Year);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].bucket == 2023);
    CHECK(rows[0].days_total == 10);
    CHECK(rows[0].days_disrupted == 1);
    CHECK(rows[0].ratio == 0.1);

    SECTION("empty disrupted set gives zero ratios") {
        auto zero = trend_ratios(records, {}, TrendBucket::Year);
        CHECK(zero[0].ratio == 0.0);
    }

    SECTION("months pool across years") {
        std::vector<DayRecord> two_years = records;
        auto more = make_records(std::vector<double>(10, 0.1),
                                 {1, 0, 0, 0, 0, 0, 0, 0, 0, 0});
        for (auto& r : more) r.day = Date::parse("2024-01-01").plus_days(r.day.serial() -
                                                                         Date::parse("2023-01-01").serial());
        two_years.insert(two_years.end(), more.begin(), more.end());
        auto monthly = trend_ratios(two_years, {1}, TrendBucket::Month);
        REQUIRE(monthly.size() == 1);  // all days are January days
        CHECK(monthly[0].bucket == 1);
        CHECK(monthly[0].days_total == 20);
        CHECK(monthly[0].days_disrupted == 2);
        CHECK(monthly[0].ratio == 0.1);
    }
}

TEST_CASE("cumulative metric shares sum to 100 percent per metric") {
    auto records = make_records({0.9, 0.1, 0.2, 0.3}, {1, 0, 0, 0});
    records[0].stats.cancelled = 40;
    records[0].stats.total_arrd_min = 5000;

    auto table = cumulative_metric_shares(records, {1, 0});
    REQUIRE(table.cluster_order == std::vector<int>{1, 0});
    CHECK(table.metrics == std::vector<std::string>{"days", "cancellations", "arrival_delay",
                                                    "departure_delay", "airborne_delay"});
    for (size_t m = 0; m < table.metrics.size(); ++m) {
        double total = 0.0;
        for (size_t c = 0; c < table.cluster_order.size(); ++c) {
            total += table.share_pct[c][m];
            CHECK(table.cumulative_pct[c][m] >= table.share_pct[c][m] - 1e-12);
        }
        CHECK_THAT(total, Catch::Matchers::WithinAbs(100.0, 0.01));
        CHECK_THAT(table.cumulative_pct.back()[m], Catch::Matchers::WithinAbs(100.0, 0.01));
    }
    // The disrupted cluster holds a quarter of days but most cancellations.
    CHECK(table.share_pct[0][0] == 25.0);
    CHECK(table.share_pct[0][1] > 80.0);

    SECTION("single cluster holds 100 percent of everything") {
        auto one = cumulative_metric_shares(make_records({0.1, 0.2}, {0, 0}), {0});
        for (double v : one.share_pct[0]) CHECK_THAT(v, Catch::Matchers::WithinAbs(100.0, 1e-9));
    }

    SECTION("opsnet joins as a sixth metric when every day has it") {
        for (auto& r : records) r.opsnet_min = 1000.0;
        auto with = cumulative_metric_shares(records, {1, 0});
        CHECK(with.metrics.size() == 6);
        CHECK(std::find(with.metrics.begin(), with.metrics.end(), "opsnet_delay") !=
              with.metrics.end());
    }
}

TEST_CASE("day record assembly is a total join") {
    std::vector<Date> days = {Date::parse("2023-01-01"), Date::parse("2023-01-02")};
    std::vector<int> assignments = {0, 1};
    std::vector<ClusterProfile> profiles(2);
    profiles[0].cluster_id = 0;
    profiles[0].typology = Typology::Smooth;
    profiles[0].label = "Smooth";
    profiles[1].cluster_id = 1;
    profiles[1].typology = Typology::NASDisruption;
    profiles[1].label = "NAS Disruption (east)";
    std::vector<double> raw = {0.2, 0.8};
    std::vector<double> scaled = {0.0, 1.0};
    std::vector<NasDayStats> stats(2);

    auto records = assemble_day_records(days, assignments, profiles, raw, scaled, stats);
    REQUIRE(records.size() == 2);
    CHECK(records[1].typology == Typology::NASDisruption);
    CHECK(records[1].cluster_label == "NAS Disruption (east)");
    CHECK_FALSE(records[0].opsnet_min.has_value());

    SECTION("missing opsnet day fails the join") {
        std::map<int64_t, double> opsnet = {{days[0].serial(), 100.0}};
        CHECK_THROWS_AS(
            assemble_day_records(days, assignments, profiles, raw, scaled, stats, &opsnet),
            DataError);
        opsnet[days[1].serial()] = 50.0;
        auto with = assemble_day_records(days, assignments, profiles, raw, scaled, stats,
                                         &opsnet);
        CHECK(with[1].opsnet_min == 50.0);
    }

    SECTION("unknown cluster id fails the join") {
        std::vector<int> bad = {0, 5};
        CHECK_THROWS_AS(assemble_day_records(days, bad, profiles, raw, scaled, stats),
                        DataError);
    }
}
