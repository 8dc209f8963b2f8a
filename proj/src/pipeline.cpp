#include "turbokv/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>

#include "turbokv/attention.hpp"
#include "turbokv/errors.hpp"

namespace turbokv {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

const char* kPreamble =
    "Answer the question using only the documents provided. "
    "If the documents do not contain the answer, refuse to answer.\n"
    "Question: ";

} // namespace

namespace testing {
thread_local std::function<void(Matrix&)> mask_fault_hook;
} // namespace testing

const char* to_string(PositionMode mode) {
    return mode == PositionMode::Composite ? "composite" : "reordered";
}

const char* to_string(PathMode mode) {
    switch (mode) {
        case PathMode::TurboReordered: return "turbo-reordered";
        case PathMode::TurboComposite: return "turbo-composite";
        case PathMode::NaiveCausal: return "naive-causal";
        case PathMode::NaiveIndependent: return "naive-independent";
    }
    return "?";
}

PathMode path_mode_from_string(const std::string& name) {
    if (name == "turbo-reordered") return PathMode::TurboReordered;
    if (name == "turbo-composite") return PathMode::TurboComposite;
    if (name == "naive-causal") return PathMode::NaiveCausal;
    if (name == "naive-independent") return PathMode::NaiveIndependent;
    throw ConfigError("unknown mode '" + name +
                      "' (expected turbo-reordered, turbo-composite, naive-causal,"
                      " or naive-independent)");
}

Engine::Engine(const ModelConfig& config,
               uint64_t seed,
               const std::string& store_root,
               StoreDtype dtype)
    : config_(config),
      seed_(seed),
      weights_(init_random(config, seed)),
      fingerprint_(model_fingerprint(config, weights_)),
      store_(store_root, dtype) {
    if (config_.vocab_size < tok::kVocabSize) {
        throw ConfigError("vocab_size must cover the byte tokenizer (>= " +
                          std::to_string(tok::kVocabSize) + ")");
    }
    if (std::filesystem::exists(index_path())) {
        index_ = RetrievalIndex::load(index_path(), fingerprint_);
    }
}

std::string Engine::index_path() const {
    return (std::filesystem::path(store_.root()) / "index.tkvi").string();
}

void Engine::save_index() const {
    index_.save(index_path(), fingerprint_);
}

IngestStats Engine::ingest(const std::vector<Document>& docs, int64_t target_len) {
    IngestStats stats;
    for (const Document& doc : docs) {
        const auto payloads = chunk_document(doc.text, target_len);
        for (const auto& payload : payloads) {
            try {
                ingest_chunk_payload(doc.id, payload, &stats);
            } catch (const Error& e) {
                throw Error("ingest of document '" + doc.id + "' failed: " + e.what());
            }
        }
    }
    save_index();
    return stats;
}

uint64_t Engine::ingest_chunk_payload(const std::string& doc_id,
                                      const std::vector<Token>& payload,
                                      IngestStats* stats) {
    const std::vector<Token> framed = tok::frame_chunk(payload);
    const uint64_t id = chunk_content_id(framed, fingerprint_);
    if (stats) stats->chunks += 1;

    bool wrote = false;
    if (!store_.contains(id)) {
        const int64_t len = static_cast<int64_t>(framed.size());
        const PositionIds positions = PositionIds::sequential(len, 0);
        const Matrix mask = causal_rows(len, 0);
        ForwardResult fw = forward_tokens(config_, weights_, framed, positions, nullptr, mask);

        ChunkKVCache cache;
        cache.chunk_id = id;
        cache.token_count = len;
        cache.kv_head_num = config_.kv_head_num;
        cache.head_size = config_.head_size;
        cache.k = std::move(fw.k);
        cache.v = std::move(fw.v);
        cache.config_fingerprint = fingerprint_;
        cache.format_version = 1;
        const uint64_t bytes = store_.store(cache);
        if (stats) stats->bytes_written += bytes;
        wrote = bytes > 0;
    }
    if (!index_.contains(id)) {
        ChunkRecord record;
        record.chunk_id = id;
        record.doc_id = doc_id;
        record.tokens = framed;
        record.embedding = embed(payload);
        index_.add(std::move(record));
    }
    if (stats && wrote) stats->new_chunks += 1;
    return id;
}

AssembledContext Engine::assemble(const std::vector<uint64_t>& chunk_ids,
                                  PositionMode mode) const {
    AssembledContext ctx =
        AssembledContext::empty(config_.layer_num, fingerprint_, MaskMode::Independent);
    int64_t running = 0;
    int64_t max_len = 0;
    int64_t seg_id = 0;
    for (uint64_t id : chunk_ids) {
        ChunkKVCache chunk = store_.load(id, fingerprint_);
        if (chunk.kv_head_num != config_.kv_head_num || chunk.head_size != config_.head_size ||
            static_cast<int64_t>(chunk.k.size()) != config_.layer_num) {
            throw StaleCacheError("chunk geometry does not match the engine config");
        }
        const int64_t len = chunk.token_count;
        const int64_t first = mode == PositionMode::Reordered ? running : 0;
        ctx.append(chunk.k, chunk.v, PositionIds::sequential(len, first));
        Segment seg;
        seg.id = seg_id++;
        seg.kind = SegmentKind::Chunk;
        seg.token_count = len;
        ctx.layout.segments.push_back(seg);
        running += len;
        max_len = std::max(max_len, len);
    }
    // Composite leaves no defined "end": the query starts after the longest
    // chunk, the first position the overlapped arrangement has free.
    ctx.next_position = mode == PositionMode::Reordered ? running : max_len;
    return ctx;
}

Matrix Engine::prefill_query(AssembledContext& ctx,
                             const std::vector<Token>& query_tokens,
                             FlopCounter* counter) const {
    if (query_tokens.empty()) throw DomainError("prefill_query: empty query");
    if (ctx.fingerprint != fingerprint_) {
        throw StaleCacheError("context was assembled under a different model");
    }
    const int64_t qlen = static_cast<int64_t>(query_tokens.size());
    const PositionIds positions = PositionIds::sequential(qlen, ctx.next_position);
    const Matrix mask = causal_rows(qlen, ctx.total_tokens());
    ForwardResult fw =
        forward_tokens(config_, weights_, query_tokens, positions, &ctx, mask, counter);

    ctx.append(fw.k, fw.v, positions);
    ctx.extend_query_segment(qlen);
    ctx.next_position += qlen;
    Matrix last(1, fw.logits.cols());
    std::copy(fw.logits.row(qlen - 1), fw.logits.row(qlen - 1) + fw.logits.cols(), last.row(0));
    ctx.last_logits = last;
    return last;
}

AssembledContext Engine::naive_prefill(const std::vector<std::vector<Token>>& framed_chunks,
                                       const std::vector<Token>& query_tokens,
                                       MaskMode mode,
                                       FlopCounter* counter) const {
    if (query_tokens.empty()) throw DomainError("naive_prefill: empty query");

    SegmentLayout layout;
    std::vector<Token> all;
    int64_t seg_id = 0;
    for (const auto& chunk : framed_chunks) {
        if (chunk.empty()) throw DomainError("naive_prefill: empty chunk");
        Segment seg;
        seg.id = seg_id++;
        seg.kind = SegmentKind::Chunk;
        seg.token_count = static_cast<int64_t>(chunk.size());
        layout.segments.push_back(seg);
        all.insert(all.end(), chunk.begin(), chunk.end());
    }
    Segment query_seg;
    query_seg.id = seg_id;
    query_seg.kind = SegmentKind::Query;
    query_seg.token_count = static_cast<int64_t>(query_tokens.size());
    layout.segments.push_back(query_seg);
    all.insert(all.end(), query_tokens.begin(), query_tokens.end());

    const int64_t total = static_cast<int64_t>(all.size());
    Matrix mask = build_mask(layout, mode);
    if (testing::mask_fault_hook) testing::mask_fault_hook(mask);
    const PositionIds positions = PositionIds::sequential(total, 0);
    ForwardResult fw =
        forward_tokens(config_, weights_, all, positions, nullptr, mask, counter);

    AssembledContext ctx = AssembledContext::empty(config_.layer_num, fingerprint_, mode);
    ctx.append(fw.k, fw.v, positions);
    ctx.layout = layout;
    ctx.next_position = total;
    Matrix last(1, fw.logits.cols());
    std::copy(fw.logits.row(total - 1), fw.logits.row(total - 1) + fw.logits.cols(),
              last.row(0));
    ctx.last_logits = last;
    return ctx;
}

AssembledContext Engine::naive_prefill_ids(const std::vector<uint64_t>& chunk_ids,
                                           const std::vector<Token>& query_tokens,
                                           MaskMode mode,
                                           FlopCounter* counter) const {
    std::vector<std::vector<Token>> chunks;
    chunks.reserve(chunk_ids.size());
    for (uint64_t id : chunk_ids) {
        chunks.push_back(index_.get(id).tokens);
    }
    return naive_prefill(chunks, query_tokens, mode, counter);
}

std::vector<Token> Engine::build_query_tokens(const std::string& question) const {
    return tok::encode(kPreamble + question + "\nAnswer:");
}

AnswerResult Engine::answer(const std::string& question,
                            int64_t k,
                            PathMode mode,
                            int64_t max_new) {
    if (question.empty()) throw DomainError("answer: empty question");
    if (index_.empty()) {
        throw NoContextError("nothing has been ingested; refusing to answer");
    }

    AnswerResult result;

    auto t_retrieval = Clock::now();
    const std::vector<double> query_embedding = embed(tok::encode(question));
    result.retrieved = index_.top_k(query_embedding, k);
    result.retrieval_ms = ms_since(t_retrieval);

    const std::vector<Token> query_tokens = build_query_tokens(question);
    result.query_tokens = static_cast<int64_t>(query_tokens.size());
    for (uint64_t id : result.retrieved) {
        result.context_tokens += static_cast<int64_t>(index_.get(id).tokens.size());
    }

    FlopCounter prefill_counter;
    AssembledContext ctx = AssembledContext::empty(config_.layer_num, fingerprint_,
                                                   MaskMode::Independent);
    const int64_t total = result.context_tokens + result.query_tokens;

    if (mode == PathMode::TurboReordered || mode == PathMode::TurboComposite) {
        const PositionMode positions = mode == PathMode::TurboReordered
                                           ? PositionMode::Reordered
                                           : PositionMode::Composite;
        auto t_ttft = Clock::now();
        auto t_load = Clock::now();
        ctx = assemble(result.retrieved, positions);
        result.cache_load_ms = ms_since(t_load);
        prefill_query(ctx, query_tokens, &prefill_counter);
        result.ttft_ms = ms_since(t_ttft);
        result.modeled_prefill_flops =
            flops(config_, result.query_tokens, total, 1).total;
    } else {
        const MaskMode mask_mode =
            mode == PathMode::NaiveCausal ? MaskMode::Causal : MaskMode::Independent;
        std::vector<std::vector<Token>> chunks;
        chunks.reserve(result.retrieved.size());
        for (uint64_t id : result.retrieved) {
            chunks.push_back(index_.get(id).tokens);
        }
        auto t_ttft = Clock::now();
        ctx = naive_prefill(chunks, query_tokens, mask_mode, &prefill_counter);
        result.ttft_ms = ms_since(t_ttft);
        result.modeled_prefill_flops = flops(config_, total, total, 1).total;
    }
    result.prefill_flops = prefill_counter.total();

    FlopCounter decode_counter;
    auto t_decode = Clock::now();
    result.tokens = greedy_decode(config_, weights_, ctx, max_new, tok::kEos, &decode_counter);
    result.decode_ms = ms_since(t_decode);
    result.decode_flops = decode_counter.total();
    result.text = tok::decode(result.tokens);
    return result;
}

} // namespace turbokv
