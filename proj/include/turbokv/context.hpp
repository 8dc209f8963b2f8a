#pragma once

#include <cstdint>
#include <vector>

#include "turbokv/attention.hpp"
#include "turbokv/matrix.hpp"
#include "turbokv/rope.hpp"

namespace turbokv {

// Concatenated multi-chunk KV state. Keys are held unrotated; rotation
// happens transiently at score time with this context's position ids, so the
// same stored tensors serve any position arrangement. Single-writer: decode
// appends tokens, reads may not overlap writes.
struct AssembledContext {
    std::vector<Matrix> k; // per layer, [total_tokens, kv_head_num*head_size], unrotated
    std::vector<Matrix> v; // per layer, same shape
    SegmentLayout layout;
    PositionIds positions;    // one id per held token
    MaskMode mask_mode = MaskMode::Independent;
    int64_t next_position = 0;
    uint64_t fingerprint = 0;
    Matrix last_logits;       // [1, vocab] once prefilled; empty before

    int64_t total_tokens() const { return positions.size(); }
    bool prefilled() const { return last_logits.rows() == 1; }

    // Appends one forward pass worth of per-layer K/V plus its positions.
    void append(const std::vector<Matrix>& new_k,
                const std::vector<Matrix>& new_v,
                const PositionIds& new_positions);

    // Grows the trailing Query segment (creating it if absent) by `count`.
    void extend_query_segment(int64_t count);

    static AssembledContext empty(int64_t layer_num, uint64_t fingerprint, MaskMode mode);
};

} // namespace turbokv
