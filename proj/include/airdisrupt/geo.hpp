#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "airdisrupt/csv.hpp"
#include "airdisrupt/errors.hpp"

namespace airdisrupt {

struct Airport {
    std::string code;
    std::string artcc;
    double lat = 0.0;  // degrees, [-90, 90]
    double lon = 0.0;  // degrees, [-180, 180]
    bool large_hub = false;
};

// A set of airports sharing an ARTCC-derived region; the unit of
// geographic aggregation. Groups partition the registry.
struct AirportGroup {
    std::string group_id;  // anchor hub code when present, else ARTCC code
    std::vector<std::string> members;  // sorted airport codes
    std::string anchor_hub;            // empty when the ARTCC has no large hub
    double centroid_lat = 0.0;
    double centroid_lon = 0.0;  // mean member longitude
};

inline constexpr double kEarthRadiusKm = 6371.0;

// Great-circle distance in kilometers.
inline double haversine_km(double lat1, double lon1, double lat2, double lon2) {
    constexpr double deg = 0.017453292519943295;  // pi/180
    double phi1 = lat1 * deg, phi2 = lat2 * deg;
    double dphi = (lat2 - lat1) * deg;
    double dlam = (lon2 - lon1) * deg;
    double sp = std::sin(dphi / 2.0), sl = std::sin(dlam / 2.0);
    double a = sp * sp + std::cos(phi1) * std::cos(phi2) * sl * sl;
    a = std::min(1.0, std::max(0.0, a));
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(a));
}

inline double haversine_km(const Airport& a, const Airport& b) {
    return haversine_km(a.lat, a.lon, b.lat, b.lon);
}

namespace detail {

inline void validate_airport(const Airport& a) {
    if (a.code.empty()) throw DataError("airport with empty code");
    if (a.artcc.empty()) throw DataError("airport " + a.code + " has no ARTCC");
    if (a.lat < -90.0 || a.lat > 90.0) {
        throw DataError("airport " + a.code + " latitude out of range");
    }
    if (a.lon < -180.0 || a.lon > 180.0) {
        throw DataError("airport " + a.code + " longitude out of range");
    }
}

inline AirportGroup finish_group(std::string group_id, std::string anchor,
                                 std::vector<const Airport*> members) {
    std::sort(members.begin(), members.end(),
              [](const Airport* a, const Airport* b) { return a->code < b->code; });
    AirportGroup g;
    g.group_id = std::move(group_id);
    g.anchor_hub = std::move(anchor);
    double lat = 0.0, lon = 0.0;
    for (const Airport* a : members) {
        g.members.push_back(a->code);
        lat += a->lat;
        lon += a->lon;
    }
    g.centroid_lat = lat / double(members.size());
    g.centroid_lon = lon / double(members.size());
    return g;
}

}  // namespace detail

// Partition the registry into airport groups, one ARTCC at a time:
//   - 0 or 1 large hubs in the ARTCC: the whole ARTCC is one group
//     (anchored at the hub when there is one);
//   - more than 1 large hub: one group per hub, every non-hub joining its
//     nearest hub by great-circle distance. Exact distance ties go to the
//     lexicographically smaller hub code.
// The result is independent of registry row order: airports are keyed by
// code and every per-group list is sorted.
inline std::vector<AirportGroup> group_airports(const std::vector<Airport>& registry) {
    if (registry.empty()) throw DataError("empty airport registry");

    std::map<std::string, std::vector<const Airport*>> by_artcc;
    std::unordered_map<std::string, const Airport*> by_code;
    for (const auto& a : registry) {
        detail::validate_airport(a);
        if (!by_code.emplace(a.code, &a).second) {
            throw DataError("duplicate airport code in registry: " + a.code);
        }
        by_artcc[a.artcc].push_back(&a);
    }

    std::vector<AirportGroup> groups;
    for (auto& [artcc, airports] : by_artcc) {
        std::vector<const Airport*> hubs;
        for (const Airport* a : airports) {
            if (a->large_hub) hubs.push_back(a);
        }
        std::sort(hubs.begin(), hubs.end(),
                  [](const Airport* a, const Airport* b) { return a->code < b->code; });

        if (hubs.size() <= 1) {
            std::string anchor = hubs.empty() ? std::string() : hubs[0]->code;
            std::string id = hubs.empty() ? artcc : hubs[0]->code;
            groups.push_back(detail::finish_group(id, anchor, airports));
            continue;
        }

        std::map<std::string, std::vector<const Airport*>> per_hub;
        for (const Airport* hub : hubs) per_hub[hub->code] = {hub};
        for (const Airport* a : airports) {
            if (a->large_hub) continue;
            const Airport* best = hubs[0];
            double best_d = haversine_km(*a, *best);
            for (size_t i = 1; i < hubs.size(); ++i) {
                double d = haversine_km(*a, *hubs[i]);
                if (d < best_d) {  // ties keep the earlier (smaller) hub code
                    best_d = d;
                    best = hubs[i];
                }
            }
            per_hub[best->code].push_back(a);
        }
        for (auto& [hub_code, members] : per_hub) {
            groups.push_back(detail::finish_group(hub_code, hub_code, std::move(members)));
        }
    }

    std::sort(groups.begin(), groups.end(),
              [](const AirportGroup& a, const AirportGroup& b) {
                  return a.group_id < b.group_id;
              });
    return groups;
}

// West-to-east ordering used for feature columns and loading tables.
// Ties on centroid longitude break lexicographically by group id.
inline std::vector<std::string> order_groups_by_longitude(
    const std::vector<AirportGroup>& groups) {
    if (groups.empty()) throw DataError("no airport groups to order");
    std::vector<const AirportGroup*> ptrs;
    for (const auto& g : groups) ptrs.push_back(&g);
    std::sort(ptrs.begin(), ptrs.end(), [](const AirportGroup* a, const AirportGroup* b) {
        if (a->centroid_lon != b->centroid_lon) return a->centroid_lon < b->centroid_lon;
        return a->group_id < b->group_id;
    });
    std::vector<std::string> order;
    for (const AirportGroup* g : ptrs) order.push_back(g->group_id);
    return order;
}

// -- registry / group files --------------------------------------------

inline std::vector<Airport> read_airports(const std::string& path) {
    csv::Reader reader(path);
    reader.read_header({"code", "artcc", "lat", "lon", "large_hub"});
    std::vector<Airport> out;
    csv::Row row;
    while (reader.next(row)) {
        const std::string where = path + ":" + std::to_string(row.line_no);
        if (row.fields.size() != 5) {
            throw DataError(where + ": expected 5 columns, got " +
                            std::to_string(row.fields.size()));
        }
        Airport a;
        a.code = row.fields[0];
        a.artcc = row.fields[1];
        a.lat = csv::parse_double(row.fields[2], where + " column lat");
        a.lon = csv::parse_double(row.fields[3], where + " column lon");
        if (row.fields[4] != "0" && row.fields[4] != "1") {
            throw DataError(where + " column large_hub: expected 0 or 1");
        }
        a.large_hub = row.fields[4] == "1";
        detail::validate_airport(a);
        out.push_back(std::move(a));
    }
    return out;
}

inline void write_airports(const std::string& path, const std::vector<Airport>& airports) {
    csv::Writer w(path);
    w.raw_line("code,artcc,lat,lon,large_hub");
    for (const auto& a : airports) {
        w.field(a.code).field(a.artcc).field(a.lat).field(a.lon).field(
            a.large_hub ? "1" : "0");
        w.end_row();
    }
}

inline void write_groups(const std::string& path, const std::vector<AirportGroup>& groups) {
    csv::Writer w(path);
    w.raw_line("group_id,anchor_hub,centroid_lat,centroid_lon,members");
    for (const auto& g : groups) {
        std::string members;
        for (const auto& m : g.members) {
            if (!members.empty()) members += ';';
            members += m;
        }
        w.field(g.group_id)
            .field(g.anchor_hub)
            .field(g.centroid_lat)
            .field(g.centroid_lon)
            .field(members);
        w.end_row();
    }
}

inline std::vector<AirportGroup> read_groups(const std::string& path) {
    csv::Reader reader(path);
    reader.read_header({"group_id", "anchor_hub", "centroid_lat", "centroid_lon", "members"});
    std::vector<AirportGroup> out;
    csv::Row row;
    while (reader.next(row)) {
        const std::string where = path + ":" + std::to_string(row.line_no);
        if (row.fields.size() != 5) {
            throw DataError(where + ": expected 5 columns");
        }
        AirportGroup g;
        g.group_id = row.fields[0];
        g.anchor_hub = row.fields[1];
        g.centroid_lat = csv::parse_double(row.fields[2], where + " centroid_lat");
        g.centroid_lon = csv::parse_double(row.fields[3], where + " centroid_lon");
        size_t start = 0;
        const std::string& ms = row.fields[4];
        while (start < ms.size()) {
            size_t pos = ms.find(';', start);
            if (pos == std::string::npos) pos = ms.size();
            g.members.push_back(ms.substr(start, pos - start));
            start = pos + 1;
        }
        if (g.members.empty()) throw DataError(where + ": group with no members");
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace airdisrupt
