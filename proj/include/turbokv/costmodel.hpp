#pragma once

#include <cstdint>

#include "turbokv/config.hpp"

namespace turbokv {

// Per-token-per-layer FLOP accounting for the SwiGLU decoder stack, lm_head
// excluded. n_context is the full final context length for every token of
// the prefill (not a per-token ramp; see flops_attention_ramped for the
// tighter variant).
struct FlopsReport {
    uint64_t c_qkv = 0;   // per token per layer
    uint64_t c_attn = 0;  // per token per layer, depends on n_context
    uint64_t c_o = 0;     // per token per layer
    uint64_t c_mlp = 0;   // per token per layer
    uint64_t total = 0;   // batch * n_input * layer_num * (c_qkv + c_attn + c_o + c_mlp)
    int64_t n_input = 0;
    int64_t n_context = 0;
    int64_t batch = 0;

    double tflops() const { return static_cast<double>(total) / 1e12; }
};

struct FlopsComparison {
    FlopsReport naive;  // recompute everything: n_input == n_context
    FlopsReport turbo;  // forward only the query: n_input == query tokens
    double reduction_percent = 0.0;
};

// Cost of forwarding n_input tokens whose attention spans n_context tokens.
FlopsReport flops(const ModelConfig& config, int64_t n_input, int64_t n_context, int64_t batch);

// naive: n_input = n_context = chunk + query tokens.
// turbo: n_input = query tokens, n_context = chunk + query tokens.
FlopsComparison compare(const ModelConfig& config,
                        int64_t chunk_tokens,
                        int64_t query_tokens,
                        int64_t batch);

// Attention term with the exact per-token context ramp (token t of the new
// block sees past + t + 1 positions). Tighter than the single-n_context
// formulation; not used by the standard reports.
uint64_t flops_attention_ramped(const ModelConfig& config, int64_t n_input, int64_t past);

// Instrumented counter fed by the model's forward passes. Sites add the same
// per-token costs the cost model predicts, with the token and context counts
// the engine actually ran, so measured == modeled exactly unless a path
// forwards tokens it should not.
struct FlopCounter {
    uint64_t qkv = 0;
    uint64_t attn = 0;
    uint64_t o = 0;
    uint64_t mlp = 0;

    uint64_t total() const { return qkv + attn + o + mlp; }

    // One forward of `tokens` new tokens attending over `context` positions.
    void add_forward(const ModelConfig& config, int64_t tokens, int64_t context);

    void reset() { qkv = attn = o = mlp = 0; }
};

} // namespace turbokv
