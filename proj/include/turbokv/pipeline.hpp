#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "turbokv/config.hpp"
#include "turbokv/context.hpp"
#include "turbokv/costmodel.hpp"
#include "turbokv/kvstore.hpp"
#include "turbokv/model.hpp"
#include "turbokv/retrieval.hpp"

namespace turbokv {

// Composite restarts every chunk at position 0 (what raw cache concatenation
// yields); Reordered assigns cumulative positions so relative distances match
// a contiguous sequence. Composite is kept runnable because its defect is
// part of what the engine demonstrates.
enum class PositionMode { Composite, Reordered };

// The four end-to-end paths the CLI exposes. Turbo paths reuse stored chunk
// KV; naive paths recompute everything in one forward pass.
enum class PathMode { TurboReordered, TurboComposite, NaiveCausal, NaiveIndependent };

const char* to_string(PositionMode mode);
const char* to_string(PathMode mode);
PathMode path_mode_from_string(const std::string& name); // ConfigError on unknown

struct Document {
    std::string id;
    std::string text;
};

struct IngestStats {
    int64_t chunks = 0;     // chunks the corpus maps to, duplicates included
    int64_t new_chunks = 0; // chunks actually written this call
    uint64_t bytes_written = 0;
};

struct AnswerResult {
    std::string text;
    std::vector<Token> tokens;
    std::vector<uint64_t> retrieved;
    double retrieval_ms = 0.0;
    double cache_load_ms = 0.0; // inside ttft_ms for turbo paths
    double ttft_ms = 0.0;       // inputs ready -> first-token logits
    double decode_ms = 0.0;
    uint64_t prefill_flops = 0;
    uint64_t modeled_prefill_flops = 0;
    uint64_t decode_flops = 0;
    int64_t context_tokens = 0; // chunk tokens attended over
    int64_t query_tokens = 0;
};

namespace testing {
// When set, applied to the naive prefill mask before the forward pass. Lets
// the verify command demonstrate that the equivalence property actually
// fails under corruption.
extern thread_local std::function<void(Matrix&)> mask_fault_hook;
} // namespace testing

// Owns the weights, the cache store, and the retrieval index; every path the
// engine supports runs through here. Weights are regenerated from (config,
// seed), so two engines built with the same pair interoperate on one store.
class Engine {
public:
    Engine(const ModelConfig& config,
           uint64_t seed,
           const std::string& store_root,
           StoreDtype dtype = StoreDtype::F64);

    const ModelConfig& config() const { return config_; }
    const ModelWeights& weights() const { return weights_; }
    uint64_t fingerprint() const { return fingerprint_; }
    uint64_t seed() const { return seed_; }
    const CacheStore& store() const { return store_; }
    const RetrievalIndex& index() const { return index_; }

    // Chunk, embed, prefill offline (per-chunk causal mask, positions
    // 0..len-1, keys stored unrotated), persist, index.
    IngestStats ingest(const std::vector<Document>& docs, int64_t target_len);

    // Single-chunk ingest of an unframed payload; returns its content id.
    uint64_t ingest_chunk_payload(const std::string& doc_id,
                                  const std::vector<Token>& payload,
                                  IngestStats* stats = nullptr);

    // Loads the chunks and concatenates their KV in the given order. No
    // forward pass runs; position ids follow `mode`. An empty id list yields
    // an empty context (queries then degenerate to a vanilla causal prefill).
    AssembledContext assemble(const std::vector<uint64_t>& chunk_ids, PositionMode mode) const;

    // Forwards the query over the assembled context, extending it in place.
    // Returns the final query token's logits (the TTFT logits).
    Matrix prefill_query(AssembledContext& ctx,
                         const std::vector<Token>& query_tokens,
                         FlopCounter* counter = nullptr) const;

    // One forward pass over all chunk tokens plus the query with sequential
    // positions, under the requested mask. The oracle the turbo path is
    // measured against.
    AssembledContext naive_prefill(const std::vector<std::vector<Token>>& framed_chunks,
                                   const std::vector<Token>& query_tokens,
                                   MaskMode mode,
                                   FlopCounter* counter = nullptr) const;
    AssembledContext naive_prefill_ids(const std::vector<uint64_t>& chunk_ids,
                                       const std::vector<Token>& query_tokens,
                                       MaskMode mode,
                                       FlopCounter* counter = nullptr) const;

    // Instruction preamble + question, encoded. The preamble rides in the
    // online query segment, after the cached chunks.
    std::vector<Token> build_query_tokens(const std::string& question) const;

    // Retrieval, context preparation per `mode`, query prefill, greedy
    // decode. NoContextError when nothing has been ingested.
    AnswerResult answer(const std::string& question, int64_t k, PathMode mode, int64_t max_new);

    void save_index() const;

private:
    std::string index_path() const;

    ModelConfig config_;
    uint64_t seed_;
    ModelWeights weights_;
    uint64_t fingerprint_;
    CacheStore store_;
    RetrievalIndex index_;
};

} // namespace turbokv
