#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "airdisrupt/iforest.hpp"
#include "airdisrupt/rng.hpp"

using namespace airdisrupt;

namespace {

// Rank-based AUC of outlier scores against binary labels.
double auc(const std::vector<double>& scores, const std::vector<bool>& is_outlier) {
    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), size_t(0));
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0;
    size_t positives = 0, negatives = 0;
    for (size_t i = 0; i < order.size(); ++i) {
        if (is_outlier[order[i]]) {
            rank_sum += double(i + 1);
            ++positives;
        } else {
            ++negatives;
        }
    }
    return (rank_sum - double(positives) * double(positives + 1) / 2.0) /
           (double(positives) * double(negatives));
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<size_t> order(v.size());
        std::iota(order.begin(), order.end(), size_t(0));
        std::sort(order.begin(), order.end(), [&](size_t x, size_t y) { return v[x] < v[y]; });
        std::vector<double> r(v.size());
        for (size_t i = 0; i < order.size(); ++i) r[order[i]] = double(i);
        return r;
    };
    auto ra = ranks(a), rb = ranks(b);
    double ma = 0, mb = 0;
    for (size_t i = 0; i < ra.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= double(ra.size());
    mb /= double(rb.size());
    double num = 0, da = 0, db = 0;
    for (size_t i = 0; i < ra.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma) * (ra[i] - ma);
        db += (rb[i] - mb) * (rb[i] - mb);
    }
    return num / std::sqrt(da * db);
}

}  // namespace

TEST_CASE("average path length matches the closed form") {
    CHECK(average_path_length(0) == 0.0);
    CHECK(average_path_length(1) == 0.0);
    CHECK(average_path_length(2) == 1.0);
    // Direct formula evaluation as the oracle.
    double oracle = 2.0 * (std::log(255.0) + 0.5772156649) - 2.0 * 255.0 / 256.0;
    CHECK_THAT(average_path_length(256), Catch::Matchers::WithinAbs(oracle, 1e-9));
    CHECK_THAT(average_path_length(256), Catch::Matchers::WithinAbs(10.244, 0.001));
}

TEST_CASE("identical points score exactly one half") {
    Matrix pts(50, 3);
    for (size_t r = 0; r < 50; ++r) {
        for (size_t c = 0; c < 3; ++c) pts(r, c) = 4.2;
    }
    IsolationForestModel model = fit_iforest(pts, 20, 16, 1);
    auto scores = anomaly_scores(model, pts);
    for (double s : scores) CHECK(s == 0.5);
}

TEST_CASE("score formula fixed points") {
    Matrix pts(10, 2);
    Rng rng(3);
    for (size_t r = 0; r < 10; ++r) {
        for (size_t c = 0; c < 2; ++c) pts(r, c) = rng.normal();
    }
    IsolationForestModel model = fit_iforest(pts, 10, 8, 7);
    // 2^(-E(h)/c) at E(h) = c, c/2 -> 0, and 2c.
    CHECK(std::pow(2.0, -1.0) == 0.5);
    CHECK(std::pow(2.0, -2.0) == 0.25);
    // Scores live strictly inside (0, 1).
    auto scores = anomaly_scores(model, pts);
    for (double s : scores) {
        CHECK(s > 0.0);
        CHECK(s < 1.0);
    }
}

TEST_CASE("tree invariants: splits between min and max, leaves non-empty") {
    Rng rng(17);
    Matrix pts(300, 4);
    for (size_t r = 0; r < 300; ++r) {
        for (size_t c = 0; c < 4; ++c) pts(r, c) = rng.uniform(-3, 3);
    }
    IsolationForestModel model = fit_iforest(pts, 25, 64, 5);
    CHECK(model.psi == 64);
    int height_limit = int(std::ceil(std::log2(64.0)));
    for (const auto& tree : model.trees) {
        REQUIRE_FALSE(tree.nodes.empty());
        CHECK(tree.nodes[0].size == 64);
        for (const auto& node : tree.nodes) {
            CHECK(node.size >= 1);
            if (node.feature >= 0) {
                CHECK(node.feature < 4);
                CHECK(tree.nodes[size_t(node.left)].size +
                          tree.nodes[size_t(node.right)].size ==
                      node.size);
            }
        }
        // Depth never exceeds the height limit.
        std::vector<std::pair<int, int>> stack = {{0, 0}};
        while (!stack.empty()) {
            auto [idx, depth] = stack.back();
            stack.pop_back();
            const auto& node = tree.nodes[size_t(idx)];
            if (node.feature < 0) continue;
            CHECK(depth < height_limit);
            stack.push_back({node.left, depth + 1});
            stack.push_back({node.right, depth + 1});
        }
    }
}

TEST_CASE("same inputs and seed build identical forests and scores") {
    Rng rng(23);
    Matrix pts(120, 5);
    for (size_t r = 0; r < 120; ++r) {
        for (size_t c = 0; c < 5; ++c) pts(r, c) = rng.normal();
    }
    IsolationForestModel a = fit_iforest(pts, 30, 32, 99);
    IsolationForestModel b = fit_iforest(pts, 30, 32, 99);
    auto sa = anomaly_scores(a, pts);
    auto sb = anomaly_scores(b, pts);
    CHECK(sa == sb);

    SECTION("thread count changes nothing") {
        IsolationForestModel c = fit_iforest(pts, 30, 32, 99, 4);
        auto sc = anomaly_scores(c, pts, 4);
        CHECK(sc == sa);
    }
}

TEST_CASE("planted far outliers take the top scores") {
    Rng rng(31);
    const size_t n_in = 500, n_out = 8, dims = 6;
    Matrix pts(n_in + n_out, dims);
    std::vector<bool> is_outlier(n_in + n_out, false);
    for (size_t r = 0; r < n_in; ++r) {
        for (size_t c = 0; c < dims; ++c) pts(r, c) = rng.normal();
    }
    for (size_t r = n_in; r < n_in + n_out; ++r) {
        is_outlier[r] = true;
        for (size_t c = 0; c < dims; ++c) pts(r, c) = rng.normal() + 8.0;
    }
    IsolationForestModel model = fit_iforest(pts, 100, 256, 7);
    auto scores = anomaly_scores(model, pts);
    CHECK(auc(scores, is_outlier) >= 0.95);

}

TEST_CASE("a heavily duplicated point scores at most like a far outlier") {
    Rng data_rng(37);
    int wins = 0;
    const int trials = 100;
    for (int trial = 0; trial < trials; ++trial) {
        Matrix pts(64, 2);
        for (size_t r = 0; r < 50; ++r) {
            for (size_t c = 0; c < 2; ++c) pts(r, c) = data_rng.normal();
        }
        for (size_t r = 50; r < 63; ++r) {  // one point duplicated 13 times
            pts(r, 0) = 0.25;
            pts(r, 1) = -0.25;
        }
        pts(63, 0) = 12.0;  // the far outlier
        pts(63, 1) = 12.0;
        IsolationForestModel model = fit_iforest(pts, 50, 64, uint64_t(trial));
        auto scores = anomaly_scores(model, pts);
        if (scores[50] <= scores[63]) ++wins;
    }
    CHECK(wins > 50);
}

TEST_CASE("min-max scaling preserves ranks and hits the endpoints") {
    std::vector<double> raw = {0.3, 0.5, 0.7};
    ScaledScores scaled = scale_scores(raw);
    REQUIRE_FALSE(scaled.degenerate);
    REQUIRE(scaled.values.size() == 3);
    CHECK(scaled.values[0] == 0.0);  // corpus min and max land exactly on 0 and 1
    CHECK(scaled.values[2] == 1.0);
    CHECK_THAT(scaled.values[1], Catch::Matchers::WithinAbs(0.5, 1e-12));

    Rng rng(41);
    std::vector<double> raw2(200);
    for (auto& v : raw2) v = rng.uniform(0.1, 0.9);
    ScaledScores s2 = scale_scores(raw2);
    CHECK_THAT(spearman(raw2, s2.values), Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK(*std::max_element(s2.values.begin(), s2.values.end()) == 1.0);
    CHECK(*std::min_element(s2.values.begin(), s2.values.end()) == 0.0);

    SECTION("all-equal scores degrade to zeros with a warning flag") {
        std::vector<double> flat = {0.5, 0.5, 0.5};
        ScaledScores s = scale_scores(flat);
        CHECK(s.degenerate);
        CHECK(s.values == std::vector<double>{0.0, 0.0, 0.0});
    }
}

TEST_CASE("model JSON round-trip reproduces scores exactly") {
    Rng rng(47);
    Matrix pts(80, 4);
    for (size_t r = 0; r < 80; ++r) {
        for (size_t c = 0; c < 4; ++c) pts(r, c) = rng.normal();
    }
    IsolationForestModel model = fit_iforest(pts, 15, 32, 5);
    nlohmann::json j = iforest_to_json(model);
    IsolationForestModel back = iforest_from_json(j);
    auto sa = anomaly_scores(model, pts);
    auto sb = anomaly_scores(back, pts);
    CHECK(sa == sb);
    CHECK(j["trees"].size() == 15);
}

TEST_CASE("fit preconditions") {
    Matrix one(1, 2);
    CHECK_THROWS_AS(fit_iforest(one, 10, 16, 1), DataError);
    Matrix ok(10, 2);
    CHECK_THROWS_AS(fit_iforest(ok, 0, 16, 1), ConfigError);
    CHECK_THROWS_AS(fit_iforest(ok, 10, 1, 1), ConfigError);
    std::vector<double> single = {0.5};
    CHECK_THROWS_AS(scale_scores(single), DataError);
}
