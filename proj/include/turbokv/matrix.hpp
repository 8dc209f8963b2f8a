#pragma once

#include <cstdint>
#include <cmath>
#include <string>
#include <vector>

#include "turbokv/errors.hpp"

namespace turbokv {

// Dense row-major matrix of 64-bit floats. The whole engine computes in
// double precision; storage precision is a property of the cache files, not
// of this type.
class Matrix {
public:
    Matrix() = default;

    Matrix(int64_t rows, int64_t cols)
        : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows * cols), 0.0) {
        if (rows < 0 || cols < 0) {
            throw ShapeError("Matrix: negative dimension");
        }
    }

    Matrix(int64_t rows, int64_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != static_cast<size_t>(rows * cols)) {
            throw ShapeError("Matrix: data length " + std::to_string(data_.size()) +
                             " != " + std::to_string(rows) + "x" + std::to_string(cols));
        }
    }

    int64_t rows() const { return rows_; }
    int64_t cols() const { return cols_; }
    int64_t size() const { return rows_ * cols_; }

    double& at(int64_t i, int64_t j) { return data_[static_cast<size_t>(i * cols_ + j)]; }
    double at(int64_t i, int64_t j) const { return data_[static_cast<size_t>(i * cols_ + j)]; }

    double* row(int64_t i) { return data_.data() + i * cols_; }
    const double* row(int64_t i) const { return data_.data() + i * cols_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    const std::vector<double>& values() const { return data_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    bool operator==(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    void require_finite(const char* what) const {
        if (!all_finite()) {
            throw DomainError(std::string(what) + ": non-finite element");
        }
    }

    // Appends the rows of `more` below this matrix.
    void append_rows(const Matrix& more) {
        if (rows_ == 0 && cols_ == 0) {
            *this = more;
            return;
        }
        if (more.cols_ != cols_) {
            throw ShapeError("append_rows: column mismatch");
        }
        data_.insert(data_.end(), more.data_.begin(), more.data_.end());
        rows_ += more.rows_;
    }

private:
    int64_t rows_ = 0;
    int64_t cols_ = 0;
    std::vector<double> data_;
};

// Stacks a on top of b.
inline Matrix vstack(const Matrix& a, const Matrix& b) {
    Matrix out = a;
    out.append_rows(b);
    return out;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("max_abs_diff: shape mismatch");
    }
    double m = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
    }
    return m;
}

} // namespace turbokv
