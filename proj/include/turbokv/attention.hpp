#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "turbokv/matrix.hpp"

namespace turbokv {

// Causal: token i attends to j iff j <= i over the whole sequence.
// Independent: document chunks attend only within themselves (causally);
// query/answer tokens attend to all document tokens plus causally to
// themselves. The two modes differ only at cross-chunk positions.
enum class MaskMode { Causal, Independent };

enum class SegmentKind { Chunk, Query };

struct Segment {
    int64_t id = 0;
    SegmentKind kind = SegmentKind::Chunk;
    int64_t token_count = 0;
};

struct SegmentLayout {
    std::vector<Segment> segments;

    int64_t total_tokens() const;
    // Start offset of each segment in the concatenated sequence.
    std::vector<int64_t> offsets() const;
    // Throws unless every count >= 1 and exactly one Query segment sits last.
    void validate() const;
};

const char* to_string(MaskMode mode);

// Additive mask over the concatenated sequence: entry (i, j) is 0 where
// attention from token i to token j is permitted, -inf elsewhere.
Matrix build_mask(const SegmentLayout& layout, MaskMode mode);

// Mask rows for `new_tokens` appended after `past_tokens`: each new token
// attends to everything before it plus causally to the other new tokens.
// These are the rows both query prefill and decode use.
Matrix causal_rows(int64_t new_tokens, int64_t past_tokens);

// softmax_rows((Q K^T)/sqrt(head_size) + mask) V per head, grouped-query:
// q_states [Tq, head_num*head_size], k/v_states [Tk, kv_head_num*head_size],
// mask [Tq, Tk]. Q and K arrive pre-rotated.
Matrix attend(const Matrix& q_states,
              const Matrix& k_states,
              const Matrix& v_states,
              const Matrix& mask,
              int64_t head_size);

} // namespace turbokv
