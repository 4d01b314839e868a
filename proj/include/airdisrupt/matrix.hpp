#pragma once

#include <cstddef>
#include <vector>

#include "airdisrupt/errors.hpp"

namespace airdisrupt {

// Dense row-major matrix of doubles. Small and dumb on purpose: every
// matrix in this pipeline is days x features or features x features.
class Matrix {
public:
    Matrix() = default;
    Matrix(size_t rows, size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }

    double& operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
    double operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }

    const double* row_ptr(size_t r) const { return data_.data() + r * cols_; }
    double* row_ptr(size_t r) { return data_.data() + r * cols_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    size_t rows_ = 0;
    size_t cols_ = 0;
    std::vector<double> data_;
};

inline double squared_distance(const double* a, const double* b, size_t n) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace airdisrupt
