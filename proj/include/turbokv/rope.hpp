#pragma once

#include <cstdint>
#include <vector>

#include "turbokv/matrix.hpp"

namespace turbokv {

// Rotary position embedding over interleaved pairs (2m, 2m+1). Keys are kept
// unrotated everywhere in the engine and rotated here at use time, which is
// what lets assembled caches take arbitrary position ids.
struct RopeParams {
    int64_t head_size = 0;            // d, must be even
    double base = 10000.0;
    std::vector<double> theta;        // theta[m] = base^(-2m/d), m in [0, d/2)

    static RopeParams create(int64_t head_size, double base = 10000.0);
};

// One position id per token of the sequence it decorates.
struct PositionIds {
    std::vector<int64_t> ids;

    PositionIds() = default;
    explicit PositionIds(std::vector<int64_t> v) : ids(std::move(v)) {}

    // [first, first + count)
    static PositionIds sequential(int64_t count, int64_t first = 0);

    int64_t size() const { return static_cast<int64_t>(ids.size()); }
};

// Rotates each row of `vectors` (one token per row, cols == head_size) by its
// position: pair (x_{2m}, x_{2m+1}) at position t maps to
//   (x_{2m} cos(t theta_m) - x_{2m+1} sin(t theta_m),
//    x_{2m} sin(t theta_m) + x_{2m+1} cos(t theta_m)).
Matrix rope_rotate(const Matrix& vectors, const PositionIds& positions, const RopeParams& params);

// Same rotation applied to every head slice of a [tokens, n_heads*head_size]
// matrix, in place.
void rope_rotate_heads_inplace(Matrix& m, const PositionIds& positions, const RopeParams& params);

// dot(rotate(q, pos_q), rotate(k, pos_k)); depends only on pos_q - pos_k.
double rope_relative_score(const std::vector<double>& q,
                           const std::vector<double>& k,
                           int64_t pos_q,
                           int64_t pos_k,
                           const RopeParams& params);

} // namespace turbokv
