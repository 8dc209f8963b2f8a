#include "turbokv/config.hpp"

#include "turbokv/errors.hpp"
#include "turbokv/rng.hpp"
#include "turbokv/tokenizer.hpp"

namespace turbokv {

void ModelConfig::validate() const {
    if (layer_num < 1 || head_num < 1 || kv_head_num < 1 || head_size < 1 ||
        hidden_size < 1 || intermediate_size < 1 || vocab_size < 1) {
        throw ConfigError("ModelConfig: all counts must be >= 1");
    }
    if (hidden_size != head_num * head_size) {
        throw ConfigError("ModelConfig: hidden_size " + std::to_string(hidden_size) +
                          " != head_num * head_size = " + std::to_string(head_num * head_size));
    }
    if (head_num % kv_head_num != 0) {
        throw ConfigError("ModelConfig: head_num " + std::to_string(head_num) +
                          " not divisible by kv_head_num " + std::to_string(kv_head_num));
    }
    if (head_size % 2 != 0) {
        throw ConfigError("ModelConfig: head_size must be even for rotary embedding");
    }
    if (rope_base <= 0.0 || norm_eps < 0.0) {
        throw ConfigError("ModelConfig: rope_base must be > 0 and norm_eps >= 0");
    }
}

uint64_t ModelConfig::fingerprint_seed() const {
    Fnv1a64 h;
    h.update_u64(static_cast<uint64_t>(layer_num));
    h.update_u64(static_cast<uint64_t>(head_num));
    h.update_u64(static_cast<uint64_t>(kv_head_num));
    h.update_u64(static_cast<uint64_t>(head_size));
    h.update_u64(static_cast<uint64_t>(hidden_size));
    h.update_u64(static_cast<uint64_t>(intermediate_size));
    h.update_u64(static_cast<uint64_t>(vocab_size));
    h.update_f64(rope_base);
    h.update_f64(norm_eps);
    return h.digest();
}

ModelConfig ModelConfig::toy() {
    ModelConfig cfg;
    cfg.layer_num = 4;
    cfg.head_num = 8;
    cfg.kv_head_num = 2;
    cfg.head_size = 8;
    cfg.hidden_size = 64;
    cfg.intermediate_size = 192;
    cfg.vocab_size = tok::kVocabSize;
    return cfg;
}

ModelConfig ModelConfig::qwen2_7b_like() {
    ModelConfig cfg;
    cfg.layer_num = 28;
    cfg.head_num = 28;
    cfg.kv_head_num = 4;
    cfg.head_size = 128;
    cfg.hidden_size = 3584;
    cfg.intermediate_size = 18944;
    cfg.vocab_size = tok::kVocabSize; // byte vocab; irrelevant to cost accounting
    return cfg;
}

ModelConfig ModelConfig::preset(const std::string& name) {
    if (name == "toy") return toy();
    if (name == "qwen2-7b") return qwen2_7b_like();
    throw ConfigError("unknown preset '" + name + "' (expected 'toy' or 'qwen2-7b')");
}

} // namespace turbokv
