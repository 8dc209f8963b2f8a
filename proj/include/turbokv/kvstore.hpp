#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "turbokv/matrix.hpp"
#include "turbokv/tokenizer.hpp"

namespace turbokv {

// Per-chunk KV tensors as produced by the offline prefill: keys unrotated,
// one [token_count, kv_head_num*head_size] pair per layer.
struct ChunkKVCache {
    uint64_t chunk_id = 0;
    int64_t token_count = 0;
    int64_t kv_head_num = 0;
    int64_t head_size = 0;
    std::vector<Matrix> k;
    std::vector<Matrix> v;
    uint64_t config_fingerprint = 0;
    uint32_t format_version = 0;
};

// Content address of a framed chunk under a given model fingerprint. Same
// bytes + same model = same id, so re-ingesting is a no-op by construction.
uint64_t chunk_content_id(const std::vector<Token>& framed_tokens, uint64_t model_fingerprint);

// On-disk element type. F64 round-trips bit-exactly; F32 halves the files
// at a precision cost and is opt-in.
enum class StoreDtype : uint32_t { F64 = 1, F32 = 2 };

// Directory of .tkvc files, one per chunk, named by hex chunk id. Writes are
// atomic (temp + rename) and idempotent: an id that already exists is never
// rewritten.
class CacheStore {
public:
    CacheStore(std::string root, StoreDtype dtype = StoreDtype::F64);

    const std::string& root() const { return root_; }
    StoreDtype dtype() const { return dtype_; }

    // Bytes written; 0 means the chunk was already present and was skipped.
    uint64_t store(const ChunkKVCache& chunk);

    // NotFoundError if absent, FormatError on damage, StaleCacheError when
    // the stored fingerprint differs from expected_fingerprint.
    ChunkKVCache load(uint64_t chunk_id, uint64_t expected_fingerprint) const;

    bool contains(uint64_t chunk_id) const;

    // All stored ids, ascending.
    std::vector<uint64_t> ids() const;

    std::string path_for(uint64_t chunk_id) const;

private:
    std::string root_;
    StoreDtype dtype_;
};

} // namespace turbokv
