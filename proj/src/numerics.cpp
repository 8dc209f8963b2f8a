#include "turbokv/numerics.hpp"

#include <cmath>
#include <limits>

namespace turbokv {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " * " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
    Matrix c(a.rows(), b.cols());
    const int64_t m = a.rows(), k = a.cols(), n = b.cols();
    // i-k-j order: inner loop runs over contiguous rows of b and c.
    for (int64_t i = 0; i < m; ++i) {
        double* ci = c.row(i);
        const double* ai = a.row(i);
        for (int64_t p = 0; p < k; ++p) {
            const double aip = ai[p];
            const double* bp = b.row(p);
            for (int64_t j = 0; j < n; ++j) {
                ci[j] += aip * bp[j];
            }
        }
    }
    c.require_finite("matmul");
    return c;
}

void softmax_rows_inplace(Matrix& m) {
    const double neg_inf = -std::numeric_limits<double>::infinity();
    for (int64_t i = 0; i < m.rows(); ++i) {
        double* r = m.row(i);
        double mx = neg_inf;
        for (int64_t j = 0; j < m.cols(); ++j) {
            if (r[j] > mx) mx = r[j];
        }
        if (mx == neg_inf) {
            throw DegenerateRowError("softmax_rows: row " + std::to_string(i) +
                                     " has no attendable positions");
        }
        double sum = 0.0;
        for (int64_t j = 0; j < m.cols(); ++j) {
            if (r[j] == neg_inf) {
                r[j] = 0.0;
            } else {
                r[j] = std::exp(r[j] - mx);
                sum += r[j];
            }
        }
        const double inv = 1.0 / sum;
        for (int64_t j = 0; j < m.cols(); ++j) {
            r[j] *= inv;
            if (!std::isfinite(r[j])) {
                throw DomainError("softmax_rows: non-finite weight");
            }
        }
    }
}

Matrix softmax_rows(const Matrix& m) {
    Matrix out = m;
    softmax_rows_inplace(out);
    return out;
}

std::vector<double> rmsnorm(const std::vector<double>& x,
                            const std::vector<double>& weight,
                            double eps) {
    if (x.size() != weight.size()) {
        throw ShapeError("rmsnorm: x and weight length mismatch");
    }
    double ss = 0.0;
    for (double v : x) ss += v * v;
    const double scale = 1.0 / std::sqrt(ss / static_cast<double>(x.size()) + eps);
    std::vector<double> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] * scale * weight[i];
    }
    return out;
}

Matrix rmsnorm_rows(const Matrix& x, const std::vector<double>& weight, double eps) {
    if (static_cast<size_t>(x.cols()) != weight.size()) {
        throw ShapeError("rmsnorm_rows: weight length mismatch");
    }
    Matrix out(x.rows(), x.cols());
    for (int64_t i = 0; i < x.rows(); ++i) {
        const double* xi = x.row(i);
        double ss = 0.0;
        for (int64_t j = 0; j < x.cols(); ++j) ss += xi[j] * xi[j];
        const double scale = 1.0 / std::sqrt(ss / static_cast<double>(x.cols()) + eps);
        double* oi = out.row(i);
        for (int64_t j = 0; j < x.cols(); ++j) {
            oi[j] = xi[j] * scale * weight[static_cast<size_t>(j)];
        }
    }
    out.require_finite("rmsnorm_rows");
    return out;
}

double silu(double z) {
    return z / (1.0 + std::exp(-z));
}

Matrix swiglu_rows(const Matrix& x,
                   const Matrix& w_gate,
                   const Matrix& w_up,
                   const Matrix& w_down) {
    if (x.cols() != w_gate.rows() || x.cols() != w_up.rows() ||
        w_gate.cols() != w_up.cols() || w_up.cols() != w_down.rows() ||
        w_down.cols() != x.cols()) {
        throw ShapeError("swiglu: hidden -> intermediate -> hidden dims inconsistent");
    }
    Matrix gate = matmul(x, w_gate);  // [rows, intermediate]
    Matrix up = matmul(x, w_up);      // [rows, intermediate]
    for (int64_t i = 0; i < gate.size(); ++i) {
        gate.data()[i] = silu(gate.data()[i]) * up.data()[i];
    }
    Matrix out = matmul(gate, w_down); // [rows, hidden]
    out.require_finite("swiglu");
    return out;
}

std::vector<double> swiglu(const std::vector<double>& x,
                           const Matrix& w_gate,
                           const Matrix& w_up,
                           const Matrix& w_down) {
    Matrix xr(1, static_cast<int64_t>(x.size()), x);
    Matrix out = swiglu_rows(xr, w_gate, w_up, w_down);
    return std::vector<double>(out.row(0), out.row(0) + out.cols());
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("add: shape mismatch");
    }
    Matrix out = a;
    for (int64_t i = 0; i < out.size(); ++i) {
        out.data()[i] += b.data()[i];
    }
    return out;
}

} // namespace turbokv
