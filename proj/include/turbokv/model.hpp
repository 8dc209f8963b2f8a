#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "turbokv/attention.hpp"
#include "turbokv/config.hpp"
#include "turbokv/context.hpp"
#include "turbokv/costmodel.hpp"
#include "turbokv/matrix.hpp"
#include "turbokv/rope.hpp"
#include "turbokv/tokenizer.hpp"

namespace turbokv {

struct LayerWeights {
    std::vector<double> attn_norm; // [hidden]
    std::vector<double> mlp_norm;  // [hidden]
    Matrix wq;     // [hidden, head_num * head_size]
    Matrix wk;     // [hidden, kv_head_num * head_size]
    Matrix wv;     // [hidden, kv_head_num * head_size]
    Matrix wo;     // [head_num * head_size, hidden]
    Matrix w_gate; // [hidden, intermediate]
    Matrix w_up;   // [hidden, intermediate]
    Matrix w_down; // [intermediate, hidden]
};

struct ModelWeights {
    Matrix embedding; // [vocab, hidden]
    std::vector<LayerWeights> layers;
    std::vector<double> final_norm; // [hidden]
    Matrix lm_head;   // [hidden, vocab]
};

// Deterministic initialization from one SplitMix64 stream. Draw order is
// fixed: embedding, then per layer wq, wk, wv, wo, w_gate, w_up, w_down,
// then lm_head, each row-major. Values are uniform [-1, 1) scaled by
// 1/sqrt(hidden_size); norm vectors start at 1.0 and consume no draws.
ModelWeights init_random(const ModelConfig& config, uint64_t seed);

// FNV-1a over every tensor's doubles in the draw order above, norm vectors
// included (attn_norm and mlp_norm before their layer's matrices, final_norm
// before lm_head).
uint64_t weights_checksum(const ModelWeights& weights);

// Ties cached tensors to the exact (config, weights) pair that produced them.
uint64_t model_fingerprint(const ModelConfig& config, const ModelWeights& weights);

void save_weights(const std::string& path, const ModelConfig& config, const ModelWeights& weights);
// Returns the stored config alongside the tensors; FormatError on damage.
ModelConfig load_weights(const std::string& path, ModelWeights& weights);

struct ForwardResult {
    Matrix logits;         // [tokens, vocab]
    std::vector<Matrix> k; // per layer, new tokens only, unrotated
    std::vector<Matrix> v; // per layer, new tokens only
};

// One decoder forward over `tokens` with the given position ids. `past`
// supplies already-held K/V to attend over (may be null); `mask` must be
// [tokens, past + tokens]. Produced K is stored unrotated; Q and K are
// rotated transiently for scoring only. `counter`, when set, records the
// pass at the token/context size actually run.
ForwardResult forward_tokens(const ModelConfig& config,
                             const ModelWeights& weights,
                             const std::vector<Token>& tokens,
                             const PositionIds& positions,
                             const AssembledContext* past,
                             const Matrix& mask,
                             FlopCounter* counter = nullptr);

// Greedy continuation from ctx.last_logits: argmax per step (ties break to
// the lowest id), stop on `eos` without emitting it, append each accepted
// token to the context. Returns the emitted tokens.
std::vector<Token> greedy_decode(const ModelConfig& config,
                                 const ModelWeights& weights,
                                 AssembledContext& ctx,
                                 int64_t max_new,
                                 Token eos,
                                 FlopCounter* counter = nullptr);

} // namespace turbokv
