#include "turbokv/context.hpp"

#include "turbokv/errors.hpp"

namespace turbokv {

void AssembledContext::append(const std::vector<Matrix>& new_k,
                              const std::vector<Matrix>& new_v,
                              const PositionIds& new_positions) {
    if (new_k.size() != k.size() || new_v.size() != v.size()) {
        throw ShapeError("context append: layer count mismatch");
    }
    const int64_t count = new_positions.size();
    for (size_t layer = 0; layer < k.size(); ++layer) {
        if (new_k[layer].rows() != count || new_v[layer].rows() != count) {
            throw ShapeError("context append: token count mismatch between K/V and positions");
        }
        k[layer].append_rows(new_k[layer]);
        v[layer].append_rows(new_v[layer]);
    }
    positions.ids.insert(positions.ids.end(), new_positions.ids.begin(), new_positions.ids.end());
}

void AssembledContext::extend_query_segment(int64_t count) {
    if (count <= 0) throw DomainError("extend_query_segment: count must be positive");
    if (!layout.segments.empty() && layout.segments.back().kind == SegmentKind::Query) {
        layout.segments.back().token_count += count;
    } else {
        Segment seg;
        seg.id = layout.segments.empty() ? 0 : layout.segments.back().id + 1;
        seg.kind = SegmentKind::Query;
        seg.token_count = count;
        layout.segments.push_back(seg);
    }
}

AssembledContext AssembledContext::empty(int64_t layer_num, uint64_t fingerprint, MaskMode mode) {
    AssembledContext ctx;
    ctx.k.assign(static_cast<size_t>(layer_num), Matrix());
    ctx.v.assign(static_cast<size_t>(layer_num), Matrix());
    ctx.mask_mode = mode;
    ctx.fingerprint = fingerprint;
    return ctx;
}

} // namespace turbokv
