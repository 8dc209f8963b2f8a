#include "turbokv/attention.hpp"

#include <cmath>
#include <limits>

#include "turbokv/numerics.hpp"

namespace turbokv {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

int64_t SegmentLayout::total_tokens() const {
    int64_t n = 0;
    for (const Segment& s : segments) n += s.token_count;
    return n;
}

std::vector<int64_t> SegmentLayout::offsets() const {
    std::vector<int64_t> off(segments.size());
    int64_t n = 0;
    for (size_t i = 0; i < segments.size(); ++i) {
        off[i] = n;
        n += segments[i].token_count;
    }
    return off;
}

void SegmentLayout::validate() const {
    if (segments.empty()) {
        throw ConfigError("SegmentLayout: empty");
    }
    int64_t queries = 0;
    for (const Segment& s : segments) {
        if (s.token_count < 1) {
            throw ConfigError("SegmentLayout: segment with token_count < 1");
        }
        if (s.kind == SegmentKind::Query) ++queries;
    }
    if (queries != 1 || segments.back().kind != SegmentKind::Query) {
        throw ConfigError("SegmentLayout: exactly one Query segment required, in last place");
    }
}

const char* to_string(MaskMode mode) {
    return mode == MaskMode::Causal ? "causal" : "independent";
}

Matrix build_mask(const SegmentLayout& layout, MaskMode mode) {
    layout.validate();
    const int64_t n = layout.total_tokens();
    Matrix mask(n, n);
    for (int64_t i = 0; i < n; ++i) {
        double* row = mask.row(i);
        for (int64_t j = 0; j < n; ++j) {
            row[j] = (j <= i) ? 0.0 : kNegInf;
        }
    }
    if (mode == MaskMode::Independent) {
        // Zero out cross-chunk attention: a chunk token may only see its own
        // chunk. Query rows keep the full lower triangle.
        const std::vector<int64_t> off = layout.offsets();
        for (size_t s = 0; s < layout.segments.size(); ++s) {
            const Segment& seg = layout.segments[s];
            if (seg.kind != SegmentKind::Chunk) continue;
            const int64_t begin = off[s];
            const int64_t end = begin + seg.token_count;
            for (int64_t i = begin; i < end; ++i) {
                double* row = mask.row(i);
                for (int64_t j = 0; j < begin; ++j) {
                    row[j] = kNegInf;
                }
            }
        }
    }
    return mask;
}

Matrix causal_rows(int64_t new_tokens, int64_t past_tokens) {
    if (new_tokens < 0 || past_tokens < 0) {
        throw ShapeError("causal_rows: negative token count");
    }
    Matrix mask(new_tokens, past_tokens + new_tokens);
    for (int64_t i = 0; i < new_tokens; ++i) {
        double* row = mask.row(i);
        for (int64_t j = 0; j < mask.cols(); ++j) {
            row[j] = (j <= past_tokens + i) ? 0.0 : kNegInf;
        }
    }
    return mask;
}

Matrix attend(const Matrix& q_states,
              const Matrix& k_states,
              const Matrix& v_states,
              const Matrix& mask,
              int64_t head_size) {
    if (head_size <= 0) {
        throw ConfigError("attend: head_size must be positive");
    }
    if (q_states.cols() % head_size != 0 || k_states.cols() % head_size != 0) {
        throw ShapeError("attend: state widths not a multiple of head_size");
    }
    const int64_t head_num = q_states.cols() / head_size;
    const int64_t kv_head_num = k_states.cols() / head_size;
    if (kv_head_num == 0 || head_num % kv_head_num != 0) {
        throw ConfigError("attend: head_num " + std::to_string(head_num) +
                          " not divisible by kv_head_num " + std::to_string(kv_head_num));
    }
    if (k_states.rows() != v_states.rows() || k_states.cols() != v_states.cols()) {
        throw ShapeError("attend: K/V shape mismatch");
    }
    if (mask.rows() != q_states.rows() || mask.cols() != k_states.rows()) {
        throw ShapeError("attend: mask is " + std::to_string(mask.rows()) + "x" +
                         std::to_string(mask.cols()) + ", expected " +
                         std::to_string(q_states.rows()) + "x" + std::to_string(k_states.rows()));
    }

    const int64_t tq = q_states.rows();
    const int64_t tk = k_states.rows();
    const int64_t group = head_num / kv_head_num;
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_size));

    Matrix out(tq, head_num * head_size);
    Matrix scores(tq, tk); // scratch reused across heads

    for (int64_t h = 0; h < head_num; ++h) {
        const int64_t g = h / group;
        const int64_t q_off = h * head_size;
        const int64_t kv_off = g * head_size;

        for (int64_t i = 0; i < tq; ++i) {
            const double* qi = q_states.row(i) + q_off;
            const double* mrow = mask.row(i);
            double* srow = scores.row(i);
            for (int64_t j = 0; j < tk; ++j) {
                // finite + (-inf) is -inf, so masked entries need no dot.
                if (mrow[j] == kNegInf) {
                    srow[j] = kNegInf;
                    continue;
                }
                const double* kj = k_states.row(j) + kv_off;
                double dot = 0.0;
                for (int64_t d = 0; d < head_size; ++d) {
                    dot += qi[d] * kj[d];
                }
                srow[j] = dot * scale + mrow[j];
            }
        }

        softmax_rows_inplace(scores);

        for (int64_t i = 0; i < tq; ++i) {
            const double* w = scores.row(i);
            double* oi = out.row(i) + q_off;
            for (int64_t j = 0; j < tk; ++j) {
                const double wij = w[j];
                if (wij == 0.0) continue;
                const double* vj = v_states.row(j) + kv_off;
                for (int64_t d = 0; d < head_size; ++d) {
                    oi[d] += wij * vj[d];
                }
            }
        }
    }
    out.require_finite("attend");
    return out;
}

} // namespace turbokv
