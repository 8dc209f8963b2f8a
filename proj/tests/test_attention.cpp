#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <vector>

#include "turbokv/attention.hpp"
#include "turbokv/errors.hpp"
#include "turbokv/numerics.hpp"
#include "turbokv/rng.hpp"

using namespace turbokv;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix random_rows(SplitMix64& rng, int64_t rows, int64_t cols) {
    Matrix m(rows, cols);
    for (int64_t i = 0; i < m.size(); ++i) m.data()[i] = rng.next_signed();
    return m;
}

SegmentLayout layout_2_2_1() {
    SegmentLayout l;
    l.segments = {{0, SegmentKind::Chunk, 2},
                  {1, SegmentKind::Chunk, 2},
                  {2, SegmentKind::Query, 1}};
    return l;
}

bool visible(const Matrix& mask, int64_t i, int64_t j) { return mask.at(i, j) == 0.0; }

} // namespace

TEST_CASE("independent mask isolates chunks and opens the query row") {
    const Matrix m = build_mask(layout_2_2_1(), MaskMode::Independent);
    REQUIRE(m.rows() == 5);
    REQUIRE(m.cols() == 5);
    // Chunk 0 rows: causal inside {0,1}, nothing else.
    CHECK(visible(m, 0, 0));
    CHECK(!visible(m, 0, 1));
    CHECK(visible(m, 1, 0));
    CHECK(visible(m, 1, 1));
    CHECK(!visible(m, 1, 2));
    // Chunk 1 rows: cannot see chunk 0.
    CHECK(!visible(m, 2, 0));
    CHECK(!visible(m, 2, 1));
    CHECK(visible(m, 2, 2));
    CHECK(!visible(m, 2, 3));
    CHECK(visible(m, 3, 2));
    CHECK(visible(m, 3, 3));
    // Query row sees everything up to itself.
    for (int64_t j = 0; j < 5; ++j) CHECK(visible(m, 4, j));
}

TEST_CASE("causal mask is the plain lower triangle") {
    const Matrix m = build_mask(layout_2_2_1(), MaskMode::Causal);
    for (int64_t i = 0; i < 5; ++i) {
        for (int64_t j = 0; j < 5; ++j) {
            CHECK(visible(m, i, j) == (j <= i));
        }
    }
    // The two modes agree exactly on rows 0, 1, 4 and differ on rows 2, 3.
    const Matrix ind = build_mask(layout_2_2_1(), MaskMode::Independent);
    CHECK(ind.at(2, 0) == -kInf);
    CHECK(m.at(2, 0) == 0.0);
}

TEST_CASE("single-segment layouts make the modes coincide") {
    SegmentLayout l;
    l.segments = {{0, SegmentKind::Query, 6}};
    CHECK(build_mask(l, MaskMode::Causal) == build_mask(l, MaskMode::Independent));
}

TEST_CASE("causal_rows lets new tokens see all the past") {
    const Matrix m = causal_rows(2, 3);
    REQUIRE(m.rows() == 2);
    REQUIRE(m.cols() == 5);
    for (int64_t j = 0; j < 4; ++j) CHECK(visible(m, 0, j));
    CHECK(!visible(m, 0, 4));
    for (int64_t j = 0; j < 5; ++j) CHECK(visible(m, 1, j));
    // With no past this is just the causal mask rows.
    const Matrix solo = causal_rows(3, 0);
    for (int64_t i = 0; i < 3; ++i) {
        for (int64_t j = 0; j < 3; ++j) CHECK(visible(solo, i, j) == (j <= i));
    }
}

TEST_CASE("attending from a single token returns a convex blend of V rows") {
    SplitMix64 rng(21);
    const Matrix q = random_rows(rng, 1, 4);
    const Matrix k = random_rows(rng, 3, 4);
    const Matrix v = random_rows(rng, 3, 4);
    Matrix mask(1, 3);
    mask.at(0, 1) = -kInf;
    mask.at(0, 2) = -kInf;
    // Only key 0 is visible: output must be exactly V row 0.
    const Matrix out = attend(q, k, v, mask, 4);
    REQUIRE(out.rows() == 1);
    for (int64_t j = 0; j < 4; ++j) CHECK(out.at(0, j) == v.at(0, j));
}

TEST_CASE("attend matches a brute-force oracle") {
    SplitMix64 rng(22);
    const int64_t head_size = 4;
    const int64_t hn = 2;
    const int64_t tq = 3;
    const int64_t tk = 5;
    const Matrix q = random_rows(rng, tq, hn * head_size);
    const Matrix k = random_rows(rng, tk, hn * head_size);
    const Matrix v = random_rows(rng, tk, hn * head_size);
    Matrix mask(tq, tk);
    for (int64_t i = 0; i < tq; ++i) {
        for (int64_t j = 0; j < tk; ++j) {
            if (rng.next_below(4) == 0 && j != 0) mask.at(i, j) = -kInf;
        }
    }
    const Matrix out = attend(q, k, v, mask, head_size);

    const double scale = 1.0 / std::sqrt(static_cast<double>(head_size));
    for (int64_t h = 0; h < hn; ++h) {
        for (int64_t i = 0; i < tq; ++i) {
            // Scores, softmax in long double, then blend.
            std::vector<double> w(static_cast<size_t>(tk), -kInf);
            double mx = -kInf;
            for (int64_t j = 0; j < tk; ++j) {
                if (mask.at(i, j) == -kInf) continue;
                double dot = 0.0;
                for (int64_t d = 0; d < head_size; ++d) {
                    dot += q.at(i, h * head_size + d) * k.at(j, h * head_size + d);
                }
                w[static_cast<size_t>(j)] = dot * scale;
                mx = std::max(mx, w[static_cast<size_t>(j)]);
            }
            long double denom = 0.0L;
            for (double s : w) {
                if (s != -kInf) denom += expl(static_cast<long double>(s - mx));
            }
            for (int64_t d = 0; d < head_size; ++d) {
                long double acc = 0.0L;
                for (int64_t j = 0; j < tk; ++j) {
                    const double s = w[static_cast<size_t>(j)];
                    if (s == -kInf) continue;
                    acc += expl(static_cast<long double>(s - mx)) / denom *
                           static_cast<long double>(v.at(j, h * head_size + d));
                }
                CHECK(std::fabs(out.at(i, h * head_size + d) - static_cast<double>(acc)) < 1e-13);
            }
        }
    }
}

TEST_CASE("grouped-query attention with kv_head_num == head_num equals MHA") {
    SplitMix64 rng(23);
    const int64_t head_size = 8;
    const Matrix q = random_rows(rng, 4, 2 * head_size);
    const Matrix kv = random_rows(rng, 6, 2 * head_size);
    const Matrix v = random_rows(rng, 6, 2 * head_size);
    Matrix mask(4, 6);
    const Matrix full = attend(q, kv, v, mask, head_size);

    // Oracle: run each head separately as single-head attention.
    for (int64_t h = 0; h < 2; ++h) {
        Matrix qh(4, head_size), kh(6, head_size), vh(6, head_size);
        for (int64_t i = 0; i < 4; ++i) {
            for (int64_t d = 0; d < head_size; ++d) qh.at(i, d) = q.at(i, h * head_size + d);
        }
        for (int64_t i = 0; i < 6; ++i) {
            for (int64_t d = 0; d < head_size; ++d) {
                kh.at(i, d) = kv.at(i, h * head_size + d);
                vh.at(i, d) = v.at(i, h * head_size + d);
            }
        }
        const Matrix outh = attend(qh, kh, vh, mask, head_size);
        for (int64_t i = 0; i < 4; ++i) {
            for (int64_t d = 0; d < head_size; ++d) {
                CHECK(full.at(i, h * head_size + d) == outh.at(i, d));
            }
        }
    }
}

TEST_CASE("grouped heads share their kv head's keys exactly") {
    SplitMix64 rng(24);
    const int64_t head_size = 4;
    // 4 query heads over 2 kv heads: heads {0,1} use kv head 0, {2,3} use 1.
    Matrix q = random_rows(rng, 2, 4 * head_size);
    // Make head 1 a copy of head 0; their outputs must then be bit-identical.
    for (int64_t i = 0; i < 2; ++i) {
        for (int64_t d = 0; d < head_size; ++d) q.at(i, head_size + d) = q.at(i, d);
    }
    const Matrix k = random_rows(rng, 3, 2 * head_size);
    const Matrix v = random_rows(rng, 3, 2 * head_size);
    const Matrix out = attend(q, k, v, Matrix(2, 3), head_size);
    for (int64_t i = 0; i < 2; ++i) {
        for (int64_t d = 0; d < head_size; ++d) {
            CHECK(out.at(i, d) == out.at(i, head_size + d));
        }
    }
}

TEST_CASE("a fully masked row is an error, not silence") {
    Matrix mask(1, 2);
    mask.at(0, 0) = -kInf;
    mask.at(0, 1) = -kInf;
    CHECK_THROWS_AS(attend(Matrix(1, 4), Matrix(2, 4), Matrix(2, 4), mask, 4),
                    DegenerateRowError);
}

TEST_CASE("attend validates its shapes") {
    Matrix mask(1, 2);
    CHECK_THROWS_AS(attend(Matrix(1, 4), Matrix(2, 4), Matrix(2, 4), mask, 3), ShapeError);
    CHECK_THROWS_AS(attend(Matrix(1, 4), Matrix(2, 4), Matrix(3, 4), mask, 4), ShapeError);
    CHECK_THROWS_AS(attend(Matrix(2, 4), Matrix(2, 4), Matrix(2, 4), mask, 4), ShapeError);
    // head_num not a multiple of kv_head_num: 12 cols q over 8 cols kv.
    CHECK_THROWS_AS(attend(Matrix(1, 12), Matrix(2, 8), Matrix(2, 8), mask, 4), ConfigError);
}

TEST_CASE("layout validation catches malformed segment lists") {
    SegmentLayout empty;
    CHECK_THROWS_AS(empty.validate(), ConfigError);

    SegmentLayout no_query;
    no_query.segments = {{0, SegmentKind::Chunk, 3}};
    CHECK_THROWS_AS(no_query.validate(), ConfigError);

    SegmentLayout query_first;
    query_first.segments = {{0, SegmentKind::Query, 1}, {1, SegmentKind::Chunk, 2}};
    CHECK_THROWS_AS(query_first.validate(), ConfigError);

    SegmentLayout zero_count;
    zero_count.segments = {{0, SegmentKind::Chunk, 0}, {1, SegmentKind::Query, 1}};
    CHECK_THROWS_AS(zero_count.validate(), ConfigError);

    SegmentLayout ok = layout_2_2_1();
    CHECK_NOTHROW(ok.validate());
    CHECK(ok.total_tokens() == 5);
    const std::vector<int64_t> offs = ok.offsets();
    REQUIRE(offs.size() == 3);
    CHECK(offs[0] == 0);
    CHECK(offs[1] == 2);
    CHECK(offs[2] == 4);
}
