#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "turbokv/tokenizer.hpp"

namespace turbokv {

constexpr int64_t kEmbedDim = 256;

// Splits text into payloads of at most target_len bytes, preferring the last
// whitespace inside the window so words survive. Concatenating the payloads
// reproduces the input bytes exactly. Empty input gives an empty list; no
// chunk is ever empty.
std::vector<std::vector<Token>> chunk_document(const std::string& text, int64_t target_len);

// Feature-hashed bag of token bigrams (with a leading sentinel so singleton
// inputs have a feature), signed buckets, L2-normalized. Deterministic.
std::vector<double> embed(const std::vector<Token>& tokens, int64_t dim = kEmbedDim);

double cosine(const std::vector<double>& a, const std::vector<double>& b);

struct ChunkRecord {
    uint64_t chunk_id = 0;
    std::string doc_id;
    std::vector<Token> tokens;     // framed: doc_start payload doc_end
    std::vector<double> embedding; // over the unframed payload, unit norm
};

// Exhaustive in-memory index over chunk embeddings. Immutable once built;
// lookups and top_k are read-only.
class RetrievalIndex {
public:
    // False when the id is already indexed (content dedup).
    bool add(ChunkRecord record);

    bool contains(uint64_t chunk_id) const;
    const ChunkRecord& get(uint64_t chunk_id) const; // NotFoundError

    int64_t size() const { return static_cast<int64_t>(records_.size()); }
    bool empty() const { return records_.empty(); }
    const std::vector<ChunkRecord>& records() const { return records_; }

    // k best by cosine, descending; ties by ascending chunk_id; k beyond the
    // index size returns everything.
    std::vector<uint64_t> top_k(const std::vector<double>& query_embedding, int64_t k) const;

    void save(const std::string& path, uint64_t model_fingerprint) const;
    // StaleCacheError when the stored fingerprint does not match.
    static RetrievalIndex load(const std::string& path, uint64_t expected_fingerprint);

private:
    std::vector<ChunkRecord> records_;
};

} // namespace turbokv
