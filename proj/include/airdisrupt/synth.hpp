#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "airdisrupt/calendar.hpp"
#include "airdisrupt/csv.hpp"
#include "airdisrupt/flights.hpp"
#include "airdisrupt/geo.hpp"
#include "airdisrupt/rng.hpp"

namespace airdisrupt {

// A planted disruption: on the listed days, flights touching the affected
// groups draw extra cancellation probability and extra delay minutes.
struct DisruptionEvent {
    std::string name;
    std::vector<Date> days;
    std::vector<int> groups;  // synthetic group indices, 0-based west to east
    double cx_uplift = 0.0;
    double delay_uplift_min = 0.0;
};

struct SyntheticSpec {
    int n_groups = 8;
    int days = 120;
    Date start = Date::from_ymd(2022, 1, 1);
    double baseline_flights_per_group_day = 10.0;
    double base_cancel_rate = 0.015;
    double base_dep_delay_mean_min = 10.0;
    double seasonal_delay_amplitude = 0.3;
    std::vector<DisruptionEvent> events;
    uint64_t seed = 1;
};

struct SyntheticCorpus {
    std::vector<FlightRecord> flights;
    std::vector<Airport> airports;
    std::vector<DisruptionEvent> labels;  // ground truth, echo of the spec events
    AnalysisWindow window;
    std::vector<std::string> group_ids;  // synthetic group index -> hub code
};

namespace detail {

inline std::string two_digits(int v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%02d", v);
    return buf;
}

// One hub plus two satellites per group, hubs marching west to east so the
// construction order equals the longitude order.
inline std::vector<Airport> synth_registry(const SyntheticSpec& spec) {
    std::vector<Airport> airports;
    for (int g = 0; g < spec.n_groups; ++g) {
        double frac = spec.n_groups == 1 ? 0.0 : double(g) / double(spec.n_groups - 1);
        double lon = -122.0 + 54.0 * frac;
        double lat = 28.0 + double((g * 7) % 19);
        std::string gg = two_digits(g + 1);
        airports.push_back({"H" + gg, "Z" + gg, lat, lon, true});
        airports.push_back({"A" + gg, "Z" + gg, lat + 0.8, lon - 1.1, false});
        airports.push_back({"B" + gg, "Z" + gg, lat - 0.7, lon + 1.2, false});
    }
    return airports;
}

}  // namespace detail

// Deterministic synthetic corpus with planted ground truth. The whole
// corpus is a pure function of (spec, seed): every (day, group) cell draws
// from its own counter-derived RNG stream, so neither generation order nor
// worker count can change the output.
inline SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
    if (spec.n_groups < 1) throw ConfigError("synthetic spec needs at least 1 group");
    if (spec.days < 1) throw ConfigError("synthetic spec needs at least 1 day");
    if (spec.baseline_flights_per_group_day <= 0.0) {
        throw ConfigError("synthetic spec needs a positive baseline flight count");
    }

    SyntheticCorpus corpus;
    corpus.window.start = spec.start;
    corpus.window.end = spec.start.plus_days(spec.days - 1);
    corpus.airports = detail::synth_registry(spec);
    for (int g = 0; g < spec.n_groups; ++g) {
        corpus.group_ids.push_back("H" + detail::two_digits(g + 1));
    }

    for (const auto& ev : spec.events) {
        if (ev.days.empty()) throw ConfigError("event \"" + ev.name + "\" has no days");
        if (ev.groups.empty()) throw ConfigError("event \"" + ev.name + "\" has no groups");
        for (Date d : ev.days) {
            if (d < corpus.window.start || d > corpus.window.end) {
                throw ConfigError("event \"" + ev.name + "\" day " + d.to_string() +
                                  " lies outside the corpus window");
            }
        }
        for (int g : ev.groups) {
            if (g < 0 || g >= spec.n_groups) {
                throw ConfigError("event \"" + ev.name + "\" group index " +
                                  std::to_string(g) + " out of range");
            }
        }
    }
    corpus.labels = spec.events;

    // uplift[day][group]
    std::vector<std::vector<std::pair<double, double>>> uplift(
        size_t(spec.days),
        std::vector<std::pair<double, double>>(size_t(spec.n_groups), {0.0, 0.0}));
    for (const auto& ev : spec.events) {
        for (Date d : ev.days) {
            size_t di = size_t(d.serial() - spec.start.serial());
            for (int g : ev.groups) {
                uplift[di][size_t(g)].first += ev.cx_uplift;
                uplift[di][size_t(g)].second += ev.delay_uplift_min;
            }
        }
    }

    auto member_code = [&](int group, uint64_t pick) {
        std::string gg = detail::two_digits(group + 1);
        switch (pick % 3) {
            case 0: return "H" + gg;
            case 1: return "A" + gg;
            default: return "B" + gg;
        }
    };

    for (int di = 0; di < spec.days; ++di) {
        Date day = spec.start.plus_days(di);
        // Day-of-year phase for the seasonal delay swell.
        double phase = 2.0 * 3.141592653589793 *
                       double((day.serial() % 365)) / 365.25;
        double season = 1.0 + spec.seasonal_delay_amplitude * std::sin(phase);

        for (int g = 0; g < spec.n_groups; ++g) {
            Rng rng(derive_seed(spec.seed, uint64_t(di) * uint64_t(spec.n_groups) +
                                               uint64_t(g) + 0x51u));
            int count = rng.poisson(spec.baseline_flights_per_group_day);
            for (int i = 0; i < count; ++i) {
                int dest_group = int(rng.uniform_index(uint64_t(spec.n_groups)));
                std::string origin = member_code(g, rng.next_u64());
                std::string dest = member_code(dest_group, rng.next_u64());
                while (dest == origin) dest = member_code(dest_group, rng.next_u64());

                int dep_minute = 300 + int(rng.uniform_index(1020));
                int duration = 60 + int(rng.uniform_index(240));
                int taxi_out = 10 + int(rng.uniform_index(15));
                int taxi_in = 5 + int(rng.uniform_index(10));
                int plan_airborne = duration - taxi_out - taxi_in;

                FlightRecord f;
                char fid[48];
                std::snprintf(fid, sizeof(fid), "SYN-%05d-%02d-%03d", di, g, i);
                f.flight_id = fid;
                f.origin = origin;
                f.destination = dest;
                f.sched_dep = DateTime::from_parts(day, unsigned(dep_minute / 60),
                                                   unsigned(dep_minute % 60));
                f.sched_arr = f.sched_dep.plus_minutes(duration);
                f.plan_airborne_min = plan_airborne;

                double cx_up = uplift[size_t(di)][size_t(g)].first;
                double delay_up = uplift[size_t(di)][size_t(g)].second;
                if (dest_group != g) {
                    cx_up = std::max(cx_up, uplift[size_t(di)][size_t(dest_group)].first);
                    delay_up =
                        std::max(delay_up, uplift[size_t(di)][size_t(dest_group)].second);
                }

                double p_cancel = std::min(0.95, spec.base_cancel_rate + cx_up);
                if (rng.bernoulli(p_cancel)) {
                    f.cancelled = true;
                    corpus.flights.push_back(std::move(f));
                    continue;
                }

                double mean_dd = spec.base_dep_delay_mean_min * season + delay_up;
                double dep_dev = rng.bernoulli(0.3) ? -rng.uniform(0.0, 10.0)
                                                    : rng.exponential(mean_dd);
                f.actual_dep = f.sched_dep.plus_minutes(int64_t(std::lround(dep_dev)));

                double air_dev = rng.uniform(-5.0, 5.0);
                if (rng.bernoulli(0.25)) air_dev += rng.exponential(8.0);
                if (delay_up > 0.0) air_dev += rng.exponential(0.4 * delay_up);
                int actual_airborne =
                    std::max(10, plan_airborne + int(std::lround(air_dev)));

                f.wheels_off = f.actual_dep->plus_minutes(taxi_out +
                                                          int64_t(rng.uniform_index(5)));
                f.wheels_on = f.wheels_off->plus_minutes(actual_airborne);
                f.actual_arr =
                    f.wheels_on->plus_minutes(taxi_in + int64_t(rng.uniform_index(4)));

                // A small slice of operated flights lacks airborne data and
                // must not contribute an airborne-delay term.
                if (rng.bernoulli(0.03)) {
                    f.wheels_off.reset();
                    f.wheels_on.reset();
                    f.plan_airborne_min.reset();
                }
                corpus.flights.push_back(std::move(f));
            }
        }
    }
    return corpus;
}

inline void write_labels_csv(const std::string& path,
                             const std::vector<DisruptionEvent>& labels,
                             const std::vector<std::string>& group_ids) {
    csv::Writer w(path);
    w.raw_line("day,event,groups,cx_uplift,delay_uplift_min");
    for (const auto& ev : labels) {
        std::string groups;
        for (int g : ev.groups) {
            if (!groups.empty()) groups += ';';
            groups += group_ids[size_t(g)];
        }
        for (Date d : ev.days) {
            w.field(d.to_string())
                .field(ev.name)
                .field(groups)
                .field(ev.cx_uplift)
                .field(ev.delay_uplift_min);
            w.end_row();
        }
    }
}

}  // namespace airdisrupt
