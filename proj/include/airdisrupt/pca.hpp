#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "airdisrupt/csv.hpp"
#include "airdisrupt/dates.hpp"
#include "airdisrupt/errors.hpp"
#include "airdisrupt/features.hpp"
#include "airdisrupt/matrix.hpp"
#include "airdisrupt/parallel.hpp"

namespace airdisrupt {

// Fitted principal-component model. loadings is components x features with
// unit-norm rows (eigenvectors of the feature covariance matrix), ordered
// by descending eigenvalue. Constant input columns carry zero loadings.
struct PcaModel {
    Matrix loadings;
    std::vector<double> eigenvalues;       // descending
    std::vector<double> explained_ratio;   // eigenvalue / sum(eigenvalues)
    std::vector<bool> constant_columns;    // per input feature
    int n_selected = 0;
    bool selection_fallback = false;       // no eigenvalue above threshold
    double selected_cumulative_ratio = 0.0;
    int jacobi_sweeps = 0;

    size_t n_components() const { return eigenvalues.size(); }
    size_t n_features() const { return loadings.cols(); }
};

namespace detail {

// Cyclic Jacobi eigendecomposition for symmetric matrices. Returns
// eigenvalues in place of diag(a) and accumulates eigenvectors as columns
// of v. Deterministic sweep order, hence bit-stable across runs.
inline int jacobi_eigen(Matrix& a, Matrix& v, double tol = 1e-10, int max_sweeps = 100) {
    const size_t n = a.rows();
    v = Matrix(n, n);
    for (size_t i = 0; i < n; ++i) v(i, i) = 1.0;
    if (n <= 1) return 0;

    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (size_t p = 0; p + 1 < n; ++p) {
            for (size_t q = p + 1; q < n; ++q) off = std::max(off, std::fabs(a(p, q)));
        }
        if (off < tol) return sweep;

        for (size_t p = 0; p + 1 < n; ++p) {
            for (size_t q = p + 1; q < n; ++q) {
                double apq = a(p, q);
                if (std::fabs(apq) < tol * 1e-3) continue;
                double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                double tau = s / (1.0 + c);

                double app = a(p, p), aqq = a(q, q);
                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (size_t i = 0; i < n; ++i) {
                    if (i != p && i != q) {
                        double aip = a(i, p), aiq = a(i, q);
                        a(i, p) = aip - s * (aiq + tau * aip);
                        a(p, i) = a(i, p);
                        a(i, q) = aiq + s * (aip - tau * aiq);
                        a(q, i) = a(i, q);
                    }
                    double vip = v(i, p), viq = v(i, q);
                    v(i, p) = vip - s * (viq + tau * vip);
                    v(i, q) = viq + s * (vip - tau * viq);
                }
            }
        }
    }

    double off = 0.0;
    for (size_t p = 0; p + 1 < n; ++p) {
        for (size_t q = p + 1; q < n; ++q) off = std::max(off, std::fabs(a(p, q)));
    }
    char msg[160];
    std::snprintf(msg, sizeof(msg),
                  "eigensolver did not converge: %d sweeps, max off-diagonal %.3e "
                  "(tolerance %.1e)",
                  max_sweeps, off, tol);
    throw NumericError(msg);
}

// Population covariance of the columns of x (centered inside).
inline Matrix covariance(const Matrix& x) {
    const size_t n = x.rows(), f = x.cols();
    std::vector<double> mean(f, 0.0);
    for (size_t r = 0; r < n; ++r) {
        for (size_t c = 0; c < f; ++c) mean[c] += x(r, c);
    }
    for (auto& m : mean) m /= double(n);
    Matrix cov(f, f);
    for (size_t r = 0; r < n; ++r) {
        for (size_t i = 0; i < f; ++i) {
            double di = x(r, i) - mean[i];
            for (size_t j = i; j < f; ++j) {
                cov(i, j) += di * (x(r, j) - mean[j]);
            }
        }
    }
    for (size_t i = 0; i < f; ++i) {
        for (size_t j = i; j < f; ++j) {
            cov(i, j) /= double(n);
            cov(j, i) = cov(i, j);
        }
    }
    return cov;
}

}  // namespace detail

// Eigendecomposition of the feature covariance matrix of z. For
// standardized input this is the correlation matrix of the raw features.
// Constant-flagged columns are excluded from the decomposition and come
// back as zero loadings. Sign convention: the largest-magnitude entry of
// each eigenvector is positive, which makes the fit a pure function of z.
inline PcaModel fit_pca(const Matrix& z, const std::vector<bool>& constant_columns = {}) {
    if (z.rows() < 2) throw DataError("pca needs at least 2 rows");
    if (z.cols() < 1) throw DataError("pca needs at least 1 column");
    const size_t f = z.cols();
    std::vector<bool> constant = constant_columns;
    constant.resize(f, false);

    std::vector<size_t> active;
    for (size_t c = 0; c < f; ++c) {
        if (!constant[c]) active.push_back(c);
    }
    if (active.empty()) throw DataError("pca: all columns flagged constant");

    Matrix sub(z.rows(), active.size());
    for (size_t r = 0; r < z.rows(); ++r) {
        for (size_t c = 0; c < active.size(); ++c) sub(r, c) = z(r, active[c]);
    }

    Matrix cov = detail::covariance(sub);
    Matrix vectors;
    PcaModel model;
    model.jacobi_sweeps = detail::jacobi_eigen(cov, vectors);

    const size_t m = active.size();
    std::vector<size_t> order(m);
    std::iota(order.begin(), order.end(), size_t(0));
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (cov(a, a) != cov(b, b)) return cov(a, a) > cov(b, b);
        return a < b;
    });

    model.loadings = Matrix(m, f);
    model.eigenvalues.resize(m);
    model.constant_columns = constant;
    double total = 0.0;
    for (size_t k = 0; k < m; ++k) {
        size_t src = order[k];
        model.eigenvalues[k] = cov(src, src);
        total += cov(src, src);

        size_t arg_max = 0;
        double best = -1.0;
        for (size_t i = 0; i < m; ++i) {
            double mag = std::fabs(vectors(i, src));
            if (mag > best) {
                best = mag;
                arg_max = i;
            }
        }
        double sign = vectors(arg_max, src) < 0.0 ? -1.0 : 1.0;
        for (size_t i = 0; i < m; ++i) {
            model.loadings(k, active[i]) = sign * vectors(i, src);
        }
    }
    model.explained_ratio.resize(m);
    for (size_t k = 0; k < m; ++k) model.explained_ratio[k] = model.eigenvalues[k] / total;
    return model;
}

inline PcaModel fit_pca(const FeatureMatrix& z) {
    if (!z.standardized) throw DataError("pca expects a standardized feature matrix");
    return fit_pca(z.values, z.constant);
}

// Kaiser rule: keep components whose eigenvalue exceeds the threshold
// (default 1.0). Falls back to a single component when none qualifies.
inline int select_components(PcaModel& model, double eigenvalue_threshold = 1.0) {
    int n = 0;
    for (double ev : model.eigenvalues) {
        if (ev > eigenvalue_threshold) ++n;
    }
    model.selection_fallback = (n == 0);
    if (n == 0) n = 1;
    model.n_selected = n;
    double cum = 0.0;
    for (int k = 0; k < n; ++k) cum += model.explained_ratio[size_t(k)];
    model.selected_cumulative_ratio = cum;
    return n;
}

// Project rows of z onto the first k components. Rows are independent, so
// projection parallelizes by row.
inline Matrix project(const PcaModel& model, const Matrix& z, int k, int threads = 1) {
    if (k <= 0) throw ConfigError("projection needs k >= 1");
    if (size_t(k) > model.n_components()) {
        throw ConfigError("projection k exceeds fitted components");
    }
    if (z.cols() != model.n_features()) {
        throw DataError("projection input has wrong feature count");
    }
    Matrix scores(z.rows(), size_t(k));
    parallel_for(z.rows(), threads, [&](size_t r) {
        for (int j = 0; j < k; ++j) {
            double s = 0.0;
            const double* zr = z.row_ptr(r);
            const double* lj = model.loadings.row_ptr(size_t(j));
            for (size_t c = 0; c < z.cols(); ++c) s += zr[c] * lj[c];
            scores(r, j) = s;
        }
    });
    return scores;
}

// Back-projection (exact inverse on the standardized scale when k equals
// the full component count).
inline Matrix back_project(const PcaModel& model, const Matrix& scores) {
    Matrix z(scores.rows(), model.n_features());
    for (size_t r = 0; r < scores.rows(); ++r) {
        for (size_t c = 0; c < z.cols(); ++c) {
            double s = 0.0;
            for (size_t j = 0; j < scores.cols(); ++j) {
                s += scores(r, j) * model.loadings(j, c);
            }
            z(r, c) = s;
        }
    }
    return z;
}

// -- loading tables (per-component metric x group heatmap data) -----------

struct HeatmapTable {
    int component = 0;                       // 1-based
    std::vector<std::string> groups;         // west to east
    Matrix values;                           // kMetricCount x groups
    std::string flag;  // "system-wide", "cancellation-dominant", or ""
};

namespace detail {

// Mechanized reading of a loading pattern: one dominant sign across >= 90%
// of the (non-zero) entries, optionally restricted to CX columns with the
// delay columns much smaller.
inline std::string classify_loading_pattern(const PcaModel& model, size_t component,
                                            const std::vector<ColumnKey>& columns) {
    size_t pos = 0, neg = 0, cx_pos = 0, cx_neg = 0;
    double cx_mag = 0.0, other_mag = 0.0;
    size_t cx_n = 0, other_n = 0;
    for (size_t c = 0; c < columns.size(); ++c) {
        double v = model.loadings(component, c);
        if (model.constant_columns.size() > c && model.constant_columns[c]) continue;
        bool is_cx = columns[c].metric == Metric::CX;
        if (is_cx) {
            cx_mag += std::fabs(v);
            ++cx_n;
        } else {
            other_mag += std::fabs(v);
            ++other_n;
        }
        if (std::fabs(v) < 1e-12) continue;
        if (v > 0) {
            ++pos;
            if (is_cx) ++cx_pos;
        } else {
            ++neg;
            if (is_cx) ++cx_neg;
        }
    }
    auto one_sign = [](size_t p, size_t n) {
        return p + n > 0 && double(std::max(p, n)) >= 0.9 * double(p + n);
    };
    if (one_sign(pos, neg)) return "system-wide";
    double cx_mean = cx_n ? cx_mag / double(cx_n) : 0.0;
    double other_mean = other_n ? other_mag / double(other_n) : 0.0;
    if (one_sign(cx_pos, cx_neg) && cx_mean >= 2.0 * other_mean) {
        return "cancellation-dominant";
    }
    return "";
}

}  // namespace detail

// One table per component: rows are the four metrics, columns the groups
// ordered west to east, values the signed loadings.
inline std::vector<HeatmapTable> loadings_heatmap_data(
    const PcaModel& model, const std::vector<ColumnKey>& columns,
    const std::vector<std::string>& group_order, int k) {
    if (group_order.empty()) throw DataError("heatmap needs a group ordering");
    if (k <= 0 || size_t(k) > model.n_components()) {
        throw ConfigError("heatmap component count out of range");
    }
    std::unordered_map<std::string, size_t> group_pos;
    for (size_t i = 0; i < group_order.size(); ++i) group_pos[group_order[i]] = i;

    std::vector<HeatmapTable> tables;
    for (int comp = 0; comp < k; ++comp) {
        HeatmapTable t;
        t.component = comp + 1;
        t.groups = group_order;
        t.values = Matrix(kMetricCount, group_order.size());
        for (size_t c = 0; c < columns.size(); ++c) {
            auto it = group_pos.find(columns[c].group_id);
            if (it == group_pos.end()) {
                throw DataError("heatmap: column group " + columns[c].group_id +
                                " missing from group order");
            }
            t.values(size_t(columns[c].metric), it->second) =
                model.loadings(size_t(comp), c);
        }
        t.flag = detail::classify_loading_pattern(model, size_t(comp), columns);
        tables.push_back(std::move(t));
    }
    return tables;
}

inline void write_heatmap_csv(const std::string& path, const HeatmapTable& t) {
    csv::Writer w(path);
    std::string header = "metric";
    for (const auto& g : t.groups) header += "," + g;
    w.raw_line(header);
    for (int m = 0; m < kMetricCount; ++m) {
        w.field(metric_name(Metric(m)));
        for (size_t g = 0; g < t.groups.size(); ++g) w.field(t.values(size_t(m), g));
        w.end_row();
    }
}

// -- day scores file -------------------------------------------------------

inline void write_scores_csv(const std::string& path, const std::vector<Date>& days,
                             const Matrix& scores) {
    if (days.size() != scores.rows()) throw DataError("scores/day count mismatch");
    csv::Writer w(path);
    std::string header = "day";
    for (size_t j = 0; j < scores.cols(); ++j) header += ",pc" + std::to_string(j + 1);
    w.raw_line(header);
    for (size_t r = 0; r < scores.rows(); ++r) {
        w.field(days[r].to_string());
        for (size_t c = 0; c < scores.cols(); ++c) w.field(scores(r, c));
        w.end_row();
    }
}

struct DayScores {
    std::vector<Date> days;
    Matrix scores;
};

inline DayScores read_scores_csv(const std::string& path) {
    csv::Reader reader(path);
    auto header = reader.read_header({});
    if (header.empty() || header[0] != "day") {
        throw DataError(path + ": scores header must start with \"day\"");
    }
    DayScores out;
    std::vector<double> data;
    csv::Row row;
    while (reader.next(row)) {
        const std::string where = path + ":" + std::to_string(row.line_no);
        if (row.fields.size() != header.size()) {
            throw DataError(where + ": expected " + std::to_string(header.size()) +
                            " columns");
        }
        out.days.push_back(Date::parse(row.fields[0]));
        for (size_t i = 1; i < row.fields.size(); ++i) {
            data.push_back(csv::parse_double(row.fields[i], where));
        }
    }
    out.scores = Matrix(out.days.size(), header.size() - 1);
    out.scores.data() = std::move(data);
    return out;
}

}  // namespace airdisrupt
