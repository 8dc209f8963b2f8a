#pragma once

#include <cstdint>
#include <string>

namespace turbokv {

// Architecture hyperparameters for the decoder-only stack: pre-RMSNorm,
// grouped-query attention with rotary embeddings, SwiGLU MLP, untied output
// head.
struct ModelConfig {
    int64_t layer_num = 0;
    int64_t head_num = 0;
    int64_t kv_head_num = 0;
    int64_t head_size = 0;
    int64_t hidden_size = 0;
    int64_t intermediate_size = 0;
    int64_t vocab_size = 0;
    double rope_base = 10000.0;
    double norm_eps = 1e-6;

    // Throws ConfigError unless hidden == head_num * head_size, head_num is
    // divisible by kv_head_num, head_size is even, and all counts are >= 1.
    void validate() const;

    uint64_t fingerprint_seed() const;

    // 4 layers, hidden 64, 8 heads / 2 KV heads, head_size 8, vocab 259.
    static ModelConfig toy();
    // 28 layers, hidden 3584, 28 heads / 4 KV heads, head_size 128,
    // intermediate 18944. Used for cost accounting, not for running.
    static ModelConfig qwen2_7b_like();
    static ModelConfig preset(const std::string& name);
};

} // namespace turbokv
