#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "airdisrupt/csv.hpp"
#include "airdisrupt/dates.hpp"
#include "airdisrupt/errors.hpp"
#include "airdisrupt/matrix.hpp"
#include "airdisrupt/parallel.hpp"
#include "airdisrupt/rng.hpp"

namespace airdisrupt {

// Average unsuccessful-search path length in a binary search tree of m
// nodes; the normalizer behind isolation scores. H(i) is approximated by
// ln(i) + Euler-Mascheroni.
inline double average_path_length(int64_t m) {
    if (m <= 1) return 0.0;
    if (m == 2) return 1.0;
    constexpr double euler_gamma = 0.5772156649;
    double h = std::log(double(m - 1)) + euler_gamma;
    return 2.0 * h - 2.0 * double(m - 1) / double(m);
}

// One randomized isolation tree. Nodes live in a flat vector; leaves have
// left == -1 and remember their subsample size.
struct IsolationTree {
    struct Node {
        int feature = -1;    // split feature, -1 for leaf
        double split = 0.0;  // strictly between node min and max on feature
        int left = -1;
        int right = -1;
        int size = 0;  // points reaching the node (used at leaves)
    };
    std::vector<Node> nodes;  // nodes[0] is the root

    // Depth of the leaf x reaches plus the leaf-size adjustment.
    double path_length(const double* x) const {
        int idx = 0;
        double depth = 0.0;
        while (nodes[size_t(idx)].feature >= 0) {
            const Node& n = nodes[size_t(idx)];
            idx = x[n.feature] < n.split ? n.left : n.right;
            depth += 1.0;
        }
        return depth + average_path_length(nodes[size_t(idx)].size);
    }
};

struct IsolationForestModel {
    std::vector<IsolationTree> trees;
    int psi = 0;  // effective subsample size (requested, capped at n)
    uint64_t seed = 0;
    double c_psi = 0.0;  // average_path_length(psi)
    size_t dims = 0;
};

namespace detail {

inline int build_itree_node(IsolationTree& tree, const Matrix& points,
                            std::vector<size_t>& idx, size_t lo, size_t hi, int depth,
                            int height_limit, Rng& rng) {
    int node_id = int(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.back().size = int(hi - lo);

    const size_t count = hi - lo;
    if (count <= 1 || depth >= height_limit) return node_id;

    // Only features that still vary on this node can be split; a node
    // that is constant everywhere becomes a leaf.
    const size_t dims = points.cols();
    std::vector<int> splittable;
    std::vector<double> mins(dims), maxs(dims);
    for (size_t f = 0; f < dims; ++f) {
        double mn = points(idx[lo], f), mx = mn;
        for (size_t i = lo + 1; i < hi; ++i) {
            double v = points(idx[i], f);
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        mins[f] = mn;
        maxs[f] = mx;
        if (mx > mn) splittable.push_back(int(f));
    }
    if (splittable.empty()) return node_id;

    int feature = splittable[rng.uniform_index(splittable.size())];
    double mn = mins[size_t(feature)], mx = maxs[size_t(feature)];
    double split = mn + rng.uniform01_open() * (mx - mn);
    if (split <= mn) split = std::nextafter(mn, mx);
    if (split >= mx) split = std::nextafter(mx, mn);

    auto mid_it = std::partition(idx.begin() + long(lo), idx.begin() + long(hi),
                                 [&](size_t p) { return points(p, size_t(feature)) < split; });
    size_t mid = size_t(mid_it - idx.begin());

    int left = build_itree_node(tree, points, idx, lo, mid, depth + 1, height_limit, rng);
    int right = build_itree_node(tree, points, idx, mid, hi, depth + 1, height_limit, rng);
    tree.nodes[size_t(node_id)].feature = feature;
    tree.nodes[size_t(node_id)].split = split;
    tree.nodes[size_t(node_id)].left = left;
    tree.nodes[size_t(node_id)].right = right;
    return node_id;
}

// Uniform subsample of `psi` indices without replacement (partial
// Fisher-Yates over a scratch index array).
inline std::vector<size_t> subsample(size_t n, size_t psi, Rng& rng) {
    std::vector<size_t> all(n);
    for (size_t i = 0; i < n; ++i) all[i] = i;
    for (size_t i = 0; i < psi; ++i) {
        size_t j = i + size_t(rng.uniform_index(n - i));
        std::swap(all[i], all[j]);
    }
    all.resize(psi);
    return all;
}

}  // namespace detail

inline IsolationTree build_isolation_tree(const Matrix& points, int psi, Rng rng) {
    std::vector<size_t> idx = detail::subsample(points.rows(), size_t(psi), rng);
    int height_limit = int(std::ceil(std::log2(double(psi))));
    IsolationTree tree;
    detail::build_itree_node(tree, points, idx, 0, idx.size(), 0, height_limit, rng);
    return tree;
}

// Builds n_trees isolation trees, each on its own uniform subsample of
// size min(psi, n). Per-tree seeds derive from the master seed by tree
// index, so construction order and parallelism never change the forest.
inline IsolationForestModel fit_iforest(const Matrix& points, int n_trees, int psi,
                                        uint64_t seed, int threads = 1) {
    if (points.rows() < 2) throw DataError("isolation forest needs at least 2 points");
    if (n_trees < 1) throw ConfigError("isolation forest needs at least 1 tree");
    if (psi < 2) throw ConfigError("isolation forest needs psi >= 2");

    IsolationForestModel model;
    model.psi = int(std::min<size_t>(size_t(psi), points.rows()));
    model.seed = seed;
    model.c_psi = average_path_length(model.psi);
    model.dims = points.cols();
    model.trees.resize(size_t(n_trees));
    parallel_for(size_t(n_trees), threads, [&](size_t t) {
        model.trees[t] = build_isolation_tree(points, model.psi, Rng(derive_seed(seed, t)));
    });
    return model;
}

// s(x) = 2^(-E(h(x)) / c(psi)), averaged over trees in fixed order. Each
// path normalizes by c(psi) before averaging so a forest of pure
// c-adjustment leaves (all points identical) scores exactly 0.5.
inline double anomaly_score(const IsolationForestModel& model, const double* x) {
    double sum = 0.0;
    for (const auto& tree : model.trees) sum += tree.path_length(x) / model.c_psi;
    return std::pow(2.0, -sum / double(model.trees.size()));
}

inline std::vector<double> anomaly_scores(const IsolationForestModel& model,
                                          const Matrix& points, int threads = 1) {
    if (points.cols() != model.dims) {
        throw DataError("scoring input has wrong feature count");
    }
    std::vector<double> scores(points.rows());
    parallel_for(points.rows(), threads, [&](size_t p) {
        scores[p] = anomaly_score(model, points.row_ptr(p));
    });
    return scores;
}

struct ScaledScores {
    std::vector<double> values;
    bool degenerate = false;  // all raw scores equal; everything scaled to 0
};

// Corpus min-max rescaling to [0,1]; rank-preserving, and the most
// anomalous day lands exactly at 1.
inline ScaledScores scale_scores(const std::vector<double>& raw) {
    if (raw.size() < 2) throw DataError("scaling needs at least 2 scores");
    double mn = raw[0], mx = raw[0];
    for (double v : raw) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    ScaledScores out;
    out.values.resize(raw.size());
    if (mx <= mn) {
        out.degenerate = true;
        return out;
    }
    for (size_t i = 0; i < raw.size(); ++i) out.values[i] = (raw[i] - mn) / (mx - mn);
    return out;
}

// -- persistence -------------------------------------------------------------

// Trees serialize as nested arrays: leaf -> [size], internal ->
// [feature, split, left_subtree, right_subtree].
inline nlohmann::json tree_to_json(const IsolationTree& tree, int node) {
    const auto& n = tree.nodes[size_t(node)];
    if (n.feature < 0) return nlohmann::json::array({n.size});
    return nlohmann::json::array(
        {n.feature, n.split, tree_to_json(tree, n.left), tree_to_json(tree, n.right)});
}

inline nlohmann::json iforest_to_json(const IsolationForestModel& model) {
    nlohmann::json j;
    j["psi"] = model.psi;
    j["seed"] = model.seed;
    j["c_psi"] = model.c_psi;
    j["dims"] = model.dims;
    j["scaling"] = "corpus min-max";
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : model.trees) trees.push_back(tree_to_json(t, 0));
    j["trees"] = std::move(trees);
    return j;
}

namespace detail {

inline int tree_from_json(const nlohmann::json& j, IsolationTree& tree) {
    int node_id = int(tree.nodes.size());
    tree.nodes.emplace_back();
    if (j.size() == 1) {
        tree.nodes[size_t(node_id)].size = j[0].get<int>();
        return node_id;
    }
    if (j.size() != 4) throw DataError("malformed isolation tree node");
    int left = tree_from_json(j[2], tree);
    int right = tree_from_json(j[3], tree);
    auto& n = tree.nodes[size_t(node_id)];
    n.feature = j[0].get<int>();
    n.split = j[1].get<double>();
    n.left = left;
    n.right = right;
    n.size = tree.nodes[size_t(left)].size + tree.nodes[size_t(right)].size;
    return node_id;
}

}  // namespace detail

inline IsolationForestModel iforest_from_json(const nlohmann::json& j) {
    IsolationForestModel model;
    model.psi = j.at("psi").get<int>();
    model.seed = j.at("seed").get<uint64_t>();
    model.c_psi = j.at("c_psi").get<double>();
    model.dims = j.at("dims").get<size_t>();
    for (const auto& t : j.at("trees")) {
        IsolationTree tree;
        detail::tree_from_json(t, tree);
        model.trees.push_back(std::move(tree));
    }
    return model;
}

inline void write_anomaly_csv(const std::string& path, const std::vector<Date>& days,
                              const std::vector<double>& raw,
                              const std::vector<double>& scaled) {
    csv::Writer w(path);
    w.raw_line("day,raw_score,scaled_score");
    for (size_t i = 0; i < days.size(); ++i) {
        w.field(days[i].to_string()).field(raw[i]).field(scaled[i]);
        w.end_row();
    }
}

struct AnomalyRow {
    Date day;
    double raw = 0.0;
    double scaled = 0.0;
};

inline std::vector<AnomalyRow> read_anomaly_csv(const std::string& path) {
    csv::Reader reader(path);
    reader.read_header({"day", "raw_score", "scaled_score"});
    std::vector<AnomalyRow> out;
    csv::Row row;
    while (reader.next(row)) {
        const std::string where = path + ":" + std::to_string(row.line_no);
        if (row.fields.size() != 3) throw DataError(where + ": expected 3 columns");
        out.push_back({Date::parse(row.fields[0]), csv::parse_double(row.fields[1], where),
                       csv::parse_double(row.fields[2], where)});
    }
    return out;
}

}  // namespace airdisrupt
