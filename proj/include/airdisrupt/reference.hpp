#pragma once

#include "airdisrupt/calendar.hpp"

namespace airdisrupt::reference {

// Reference values measured on the full 2010-2024 production ASPM corpus.
// They are documentation constants: desk-scale synthetic corpora will not
// reproduce them, and nothing in the pipeline asserts them against data.

inline AnalysisWindow production_window() {
    AnalysisWindow w;
    w.start = Date::from_ymd(2010, 1, 1);
    w.end = Date::from_ymd(2024, 7, 31);
    w.exclusions = {{Date::from_ymd(2020, 3, 1), Date::from_ymd(2021, 6, 30)}};
    return w;
}

// The published figure for the window above; direct calendar arithmetic
// yields 4839, and the run manifest surfaces the difference.
inline constexpr int kPublishedDayCount = 4869;

inline constexpr int kPublishedSelectedComponents = 24;
inline constexpr double kPublishedExplainedVariancePct = 78.8;

inline constexpr double kPublishedScoreMedian = 0.09;
inline constexpr double kPublishedScoreP95 = 0.37;
inline constexpr double kPublishedScoreP99 = 0.63;
inline constexpr const char* kPublishedMaxScoreDay = "2022-12-23";

struct ClusterRow {
    const char* name;
    const char* type;
    double concentration;
    double fraction_days_pct;
    double avg_anomaly;
    double avg_sched_flights;
    double avg_cx_pct;
    double avg_arrd_min;
};

// Full-scale cluster characteristics table (12 clusters, 4 types).
inline constexpr ClusterRow kPublishedClusters[12] = {
    {"Smooth1", "Smooth", 4.10, 34.42, 0.06, 17751, 1.35, 7.73},
    {"Smooth2", "Smooth", 5.85, 21.71, 0.07, 18382, 2.15, 12.65},
    {"Almost Smooth", "Smooth", 5.60, 9.87, 0.08, 18344, 1.91, 11.29},
    {"East Slight Disturbance", "Smooth", 6.37, 9.10, 0.12, 18686, 3.52, 14.60},
    {"NAS Slight Disturbance", "Smooth", 7.12, 9.29, 0.15, 18867, 3.07, 19.28},
    {"DFW Disturbance", "Regional Disturbance", 9.54, 3.58, 0.21, 18852, 6.26, 20.70},
    {"ORD Disturbance", "Regional Disturbance", 9.54, 3.43, 0.23, 18849, 7.52, 21.66},
    {"West Disturbance", "Regional Disturbance", 11.78, 2.87, 0.24, 18297, 4.71, 18.43},
    {"Southeast Disruption", "Regional Disruption", 10.94, 2.30, 0.30, 18675, 4.11, 23.95},
    {"Northeast Disruption", "Regional Disruption", 9.15, 5.26, 0.35, 19447, 7.40, 25.17},
    {"East Super Disruption", "NAS Disruption", 16.30, 1.19, 0.50, 19332, 25.29, 14.19},
    {"NAS Disruption", "NAS Disruption", 21.76, 0.76, 0.75, 18287, 20.40, 41.74},
};

}  // namespace airdisrupt::reference
