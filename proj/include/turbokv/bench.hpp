#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "turbokv/pipeline.hpp"

namespace turbokv {

struct BenchConfig {
    std::vector<int64_t> doc_grid; // framed chunk-token totals, ascending
    int64_t query_tokens = 64;
    int64_t reps = 5;
    uint64_t seed = 42;
};

struct BenchRow {
    int64_t doc_tokens = 0;
    int64_t query_tokens = 0;
    std::string path;
    int64_t rep = 0; // 0-based, warmup excluded
    double ttft_ms = 0.0;
    uint64_t measured_flops = 0;
};

// Framed token count of every synthetic chunk (61 payload bytes + space +
// the two frame tokens).
constexpr int64_t kBenchChunkTokens = 64;

// Ingests enough fixed-size synthetic chunks to cover the largest grid
// point and returns their ids in ingest order. Grid entries must be
// multiples of kBenchChunkTokens.
std::vector<uint64_t> ingest_synthetic(Engine& engine, const BenchConfig& config);

// TTFT of turbo-reordered vs naive-independent at each grid point. The
// naive path gets its tokens handed to it before the clock starts; the
// turbo path loads its caches inside the measured window. One warmup run
// per (grid point, path) is discarded.
std::vector<BenchRow> run_bench(Engine& engine, const BenchConfig& config);

std::string bench_csv(const std::vector<BenchRow>& rows);

// Median ttft_ms per (doc_tokens, path), ascending doc_tokens.
struct BenchSummary {
    int64_t doc_tokens = 0;
    double turbo_median_ms = 0.0;
    double naive_median_ms = 0.0;
    double speedup = 0.0;
};
std::vector<BenchSummary> summarize(const std::vector<BenchRow>& rows);

} // namespace turbokv
