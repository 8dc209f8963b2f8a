#include "turbokv/rope.hpp"

#include <cmath>
#include <numeric>

namespace turbokv {

RopeParams RopeParams::create(int64_t head_size, double base) {
    if (head_size <= 0 || head_size % 2 != 0) {
        throw ConfigError("RopeParams: head_size must be positive and even, got " +
                          std::to_string(head_size));
    }
    if (base <= 0.0) {
        throw ConfigError("RopeParams: base must be positive");
    }
    RopeParams p;
    p.head_size = head_size;
    p.base = base;
    p.theta.resize(static_cast<size_t>(head_size / 2));
    for (int64_t m = 0; m < head_size / 2; ++m) {
        p.theta[static_cast<size_t>(m)] =
            std::pow(base, -2.0 * static_cast<double>(m) / static_cast<double>(head_size));
    }
    return p;
}

PositionIds PositionIds::sequential(int64_t count, int64_t first) {
    std::vector<int64_t> ids(static_cast<size_t>(count));
    std::iota(ids.begin(), ids.end(), first);
    return PositionIds(std::move(ids));
}

namespace {

void rotate_row(double* row, int64_t position, const RopeParams& params) {
    const double t = static_cast<double>(position);
    for (int64_t m = 0; m < params.head_size / 2; ++m) {
        const double angle = t * params.theta[static_cast<size_t>(m)];
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        const double x0 = row[2 * m];
        const double x1 = row[2 * m + 1];
        row[2 * m] = x0 * c - x1 * s;
        row[2 * m + 1] = x0 * s + x1 * c;
    }
}

void check_positions(const PositionIds& positions, int64_t expected) {
    if (positions.size() != expected) {
        throw ShapeError("rope: " + std::to_string(positions.size()) + " positions for " +
                         std::to_string(expected) + " tokens");
    }
    for (int64_t id : positions.ids) {
        if (id < 0) {
            throw DomainError("rope: negative position " + std::to_string(id));
        }
    }
}

} // namespace

Matrix rope_rotate(const Matrix& vectors, const PositionIds& positions, const RopeParams& params) {
    if (vectors.cols() != params.head_size) {
        throw ShapeError("rope_rotate: cols " + std::to_string(vectors.cols()) +
                         " != head_size " + std::to_string(params.head_size));
    }
    check_positions(positions, vectors.rows());
    Matrix out = vectors;
    for (int64_t i = 0; i < out.rows(); ++i) {
        rotate_row(out.row(i), positions.ids[static_cast<size_t>(i)], params);
    }
    return out;
}

void rope_rotate_heads_inplace(Matrix& m, const PositionIds& positions, const RopeParams& params) {
    if (params.head_size <= 0 || m.cols() % params.head_size != 0) {
        throw ShapeError("rope_rotate_heads: cols " + std::to_string(m.cols()) +
                         " not a multiple of head_size " + std::to_string(params.head_size));
    }
    check_positions(positions, m.rows());
    const int64_t heads = m.cols() / params.head_size;
    for (int64_t i = 0; i < m.rows(); ++i) {
        const int64_t pos = positions.ids[static_cast<size_t>(i)];
        for (int64_t h = 0; h < heads; ++h) {
            rotate_row(m.row(i) + h * params.head_size, pos, params);
        }
    }
}

double rope_relative_score(const std::vector<double>& q,
                           const std::vector<double>& k,
                           int64_t pos_q,
                           int64_t pos_k,
                           const RopeParams& params) {
    Matrix qm(1, static_cast<int64_t>(q.size()), q);
    Matrix km(1, static_cast<int64_t>(k.size()), k);
    Matrix qr = rope_rotate(qm, PositionIds({pos_q}), params);
    Matrix kr = rope_rotate(km, PositionIds({pos_k}), params);
    double dot = 0.0;
    for (int64_t j = 0; j < qr.cols(); ++j) {
        dot += qr.at(0, j) * kr.at(0, j);
    }
    return dot;
}

} // namespace turbokv
