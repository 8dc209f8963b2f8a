#include "turbokv/costmodel.hpp"

#include "turbokv/errors.hpp"

namespace turbokv {

namespace {

uint64_t u(int64_t v) { return static_cast<uint64_t>(v); }

uint64_t cost_qkv(const ModelConfig& c) {
    return 2 * u(c.hidden_size) * (u(c.head_num) + 2 * u(c.kv_head_num)) * u(c.head_size);
}

uint64_t cost_attn(const ModelConfig& c, int64_t n_context) {
    return 2 * u(c.head_num) * u(c.head_size) * u(n_context);
}

uint64_t cost_o(const ModelConfig& c) {
    return 2 * u(c.hidden_size) * u(c.hidden_size);
}

uint64_t cost_mlp(const ModelConfig& c) {
    return 2 * 3 * u(c.hidden_size) * u(c.intermediate_size);
}

} // namespace

FlopsReport flops(const ModelConfig& config, int64_t n_input, int64_t n_context, int64_t batch) {
    config.validate();
    if (n_input < 1 || n_context < 1 || batch < 1) {
        throw DomainError("flops: n_input, n_context and batch must be >= 1");
    }
    if (n_context < n_input) {
        throw DomainError("flops: n_context < n_input");
    }
    FlopsReport r;
    r.c_qkv = cost_qkv(config);
    r.c_attn = cost_attn(config, n_context);
    r.c_o = cost_o(config);
    r.c_mlp = cost_mlp(config);
    r.n_input = n_input;
    r.n_context = n_context;
    r.batch = batch;
    r.total = u(batch) * u(n_input) * u(config.layer_num) * (r.c_qkv + r.c_attn + r.c_o + r.c_mlp);
    return r;
}

FlopsComparison compare(const ModelConfig& config,
                        int64_t chunk_tokens,
                        int64_t query_tokens,
                        int64_t batch) {
    if (chunk_tokens < 0 || query_tokens < 1) {
        throw DomainError("compare: need chunk_tokens >= 0 and query_tokens >= 1");
    }
    const int64_t total_tokens = chunk_tokens + query_tokens;
    FlopsComparison cmp;
    cmp.naive = flops(config, total_tokens, total_tokens, batch);
    cmp.turbo = flops(config, query_tokens, total_tokens, batch);
    cmp.reduction_percent =
        100.0 * (1.0 - static_cast<double>(cmp.turbo.total) / static_cast<double>(cmp.naive.total));
    return cmp;
}

uint64_t flops_attention_ramped(const ModelConfig& config, int64_t n_input, int64_t past) {
    config.validate();
    if (n_input < 1 || past < 0) {
        throw DomainError("flops_attention_ramped: bad counts");
    }
    uint64_t sum = 0;
    for (int64_t t = 0; t < n_input; ++t) {
        sum += cost_attn(config, past + t + 1);
    }
    return u(config.layer_num) * sum;
}

void FlopCounter::add_forward(const ModelConfig& config, int64_t tokens, int64_t context) {
    const uint64_t layers = u(config.layer_num);
    qkv += layers * u(tokens) * cost_qkv(config);
    attn += layers * u(tokens) * cost_attn(config, context);
    o += layers * u(tokens) * cost_o(config);
    mlp += layers * u(tokens) * cost_mlp(config);
}

} // namespace turbokv
