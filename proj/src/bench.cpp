#include "turbokv/bench.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <sstream>

#include "turbokv/errors.hpp"
#include "turbokv/rng.hpp"

namespace turbokv {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string random_word(SplitMix64& rng, int64_t len) {
    std::string s(static_cast<size_t>(len), 'a');
    for (auto& c : s) c = static_cast<char>('a' + rng.next_below(26));
    return s;
}

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const size_t n = xs.size();
    if (n == 0) throw DomainError("median of empty sample");
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

} // namespace

std::vector<uint64_t> ingest_synthetic(Engine& engine, const BenchConfig& config) {
    if (config.doc_grid.empty()) throw DomainError("bench: empty doc grid");
    int64_t max_tokens = 0;
    for (int64_t d : config.doc_grid) {
        if (d < kBenchChunkTokens || d % kBenchChunkTokens != 0) {
            throw DomainError("bench: grid entries must be positive multiples of " +
                              std::to_string(kBenchChunkTokens));
        }
        max_tokens = std::max(max_tokens, d);
    }
    const int64_t chunk_count = max_tokens / kBenchChunkTokens;

    SplitMix64 rng(config.seed);
    std::vector<uint64_t> ids;
    ids.reserve(static_cast<size_t>(chunk_count));
    IngestStats stats;
    for (int64_t i = 0; i < chunk_count; ++i) {
        // 61 letters + trailing space = 62 payload bytes = 64 framed tokens.
        const std::string payload_text = random_word(rng, kBenchChunkTokens - 3) + " ";
        const std::vector<Token> payload = tok::encode(payload_text);
        const uint64_t id = engine.ingest_chunk_payload("bench", payload, &stats);
        const auto& framed = engine.index().get(id).tokens;
        if (static_cast<int64_t>(framed.size()) != kBenchChunkTokens) {
            throw DomainError("bench: synthetic chunk is not exactly " +
                              std::to_string(kBenchChunkTokens) + " tokens");
        }
        ids.push_back(id);
    }
    engine.save_index();
    return ids;
}

std::vector<BenchRow> run_bench(Engine& engine, const BenchConfig& config) {
    if (config.reps < 1) throw DomainError("bench: reps must be >= 1");
    if (config.query_tokens < 1) throw DomainError("bench: query_tokens must be >= 1");

    const std::vector<uint64_t> ids = ingest_synthetic(engine, config);

    SplitMix64 rng(config.seed ^ 0x51DEC0DEULL);
    std::string query_text = random_word(rng, config.query_tokens);
    const std::vector<Token> query = tok::encode(query_text);

    std::vector<BenchRow> rows;
    for (int64_t doc_tokens : config.doc_grid) {
        const size_t chunk_count = static_cast<size_t>(doc_tokens / kBenchChunkTokens);
        const std::vector<uint64_t> subset(ids.begin(),
                                           ids.begin() + static_cast<long>(chunk_count));
        std::vector<std::vector<Token>> framed;
        framed.reserve(chunk_count);
        for (uint64_t id : subset) framed.push_back(engine.index().get(id).tokens);

        // rep -1 is the warmup and is not recorded.
        for (int64_t rep = -1; rep < config.reps; ++rep) {
            FlopCounter counter;
            auto t0 = Clock::now();
            AssembledContext ctx = engine.assemble(subset, PositionMode::Reordered);
            engine.prefill_query(ctx, query, &counter);
            const double elapsed = ms_since(t0);
            if (rep >= 0) {
                rows.push_back({doc_tokens, config.query_tokens, "turbo-reordered", rep,
                                elapsed, counter.total()});
            }
        }
        for (int64_t rep = -1; rep < config.reps; ++rep) {
            FlopCounter counter;
            auto t0 = Clock::now();
            engine.naive_prefill(framed, query, MaskMode::Independent, &counter);
            const double elapsed = ms_since(t0);
            if (rep >= 0) {
                rows.push_back({doc_tokens, config.query_tokens, "naive-independent", rep,
                                elapsed, counter.total()});
            }
        }
    }
    return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream out;
    out << "doc_tokens,query_tokens,path,rep,ttft_ms,measured_flops\n";
    for (const auto& r : rows) {
        out << r.doc_tokens << ',' << r.query_tokens << ',' << r.path << ',' << r.rep << ','
            << r.ttft_ms << ',' << r.measured_flops << '\n';
    }
    return out.str();
}

std::vector<BenchSummary> summarize(const std::vector<BenchRow>& rows) {
    std::map<int64_t, std::map<std::string, std::vector<double>>> grouped;
    for (const auto& r : rows) {
        grouped[r.doc_tokens][r.path].push_back(r.ttft_ms);
    }
    std::vector<BenchSummary> out;
    for (auto& [doc_tokens, by_path] : grouped) {
        BenchSummary s;
        s.doc_tokens = doc_tokens;
        s.turbo_median_ms = median(by_path.at("turbo-reordered"));
        s.naive_median_ms = median(by_path.at("naive-independent"));
        s.speedup = s.naive_median_ms / s.turbo_median_ms;
        out.push_back(s);
    }
    return out;
}

} // namespace turbokv
