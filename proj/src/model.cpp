#include "turbokv/model.hpp"

#include <cmath>
#include <sstream>

#include "turbokv/errors.hpp"
#include "turbokv/numerics.hpp"
#include "turbokv/rng.hpp"
#include "turbokv/wire.hpp"

namespace turbokv {

namespace {

Matrix draw_matrix(SplitMix64& rng, int64_t rows, int64_t cols, double scale) {
    Matrix m(rows, cols);
    for (int64_t i = 0; i < m.size(); ++i) {
        m.data()[i] = rng.next_signed() * scale;
    }
    return m;
}

void checksum_vec(Fnv1a64& h, const std::vector<double>& v) {
    h.update_u64(static_cast<uint64_t>(v.size()));
    for (double x : v) h.update_f64(x);
}

void checksum_mat(Fnv1a64& h, const Matrix& m) {
    h.update_u64(static_cast<uint64_t>(m.rows()));
    h.update_u64(static_cast<uint64_t>(m.cols()));
    for (int64_t i = 0; i < m.size(); ++i) h.update_f64(m.data()[i]);
}

void write_vec(std::ostream& out, const std::vector<double>& v) {
    wire::write_u64(out, static_cast<uint64_t>(v.size()));
    for (double x : v) wire::write_f64(out, x);
}

void write_mat(std::ostream& out, const Matrix& m) {
    wire::write_u64(out, static_cast<uint64_t>(m.rows()));
    wire::write_u64(out, static_cast<uint64_t>(m.cols()));
    for (int64_t i = 0; i < m.size(); ++i) wire::write_f64(out, m.data()[i]);
}

std::vector<double> read_vec(std::istream& in) {
    uint64_t n = wire::read_u64(in, "weights vector");
    std::vector<double> v(n);
    for (uint64_t i = 0; i < n; ++i) v[i] = wire::read_f64(in, "weights vector");
    return v;
}

Matrix read_mat(std::istream& in) {
    int64_t rows = static_cast<int64_t>(wire::read_u64(in, "weights matrix"));
    int64_t cols = static_cast<int64_t>(wire::read_u64(in, "weights matrix"));
    if (rows < 0 || cols < 0 || rows * cols > (int64_t{1} << 32)) {
        throw FormatError("weights matrix: implausible shape");
    }
    Matrix m(rows, cols);
    for (int64_t i = 0; i < m.size(); ++i) m.data()[i] = wire::read_f64(in, "weights matrix");
    return m;
}

constexpr char kWeightsMagic[4] = {'T', 'K', 'V', 'W'};
constexpr uint32_t kWeightsVersion = 1;

} // namespace

ModelWeights init_random(const ModelConfig& config, uint64_t seed) {
    config.validate();
    SplitMix64 rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(config.hidden_size));
    const int64_t qdim = config.head_num * config.head_size;
    const int64_t kvdim = config.kv_head_num * config.head_size;

    ModelWeights w;
    w.embedding = draw_matrix(rng, config.vocab_size, config.hidden_size, scale);
    w.layers.resize(static_cast<size_t>(config.layer_num));
    for (auto& layer : w.layers) {
        layer.attn_norm.assign(static_cast<size_t>(config.hidden_size), 1.0);
        layer.mlp_norm.assign(static_cast<size_t>(config.hidden_size), 1.0);
        layer.wq = draw_matrix(rng, config.hidden_size, qdim, scale);
        layer.wk = draw_matrix(rng, config.hidden_size, kvdim, scale);
        layer.wv = draw_matrix(rng, config.hidden_size, kvdim, scale);
        layer.wo = draw_matrix(rng, qdim, config.hidden_size, scale);
        layer.w_gate = draw_matrix(rng, config.hidden_size, config.intermediate_size, scale);
        layer.w_up = draw_matrix(rng, config.hidden_size, config.intermediate_size, scale);
        layer.w_down = draw_matrix(rng, config.intermediate_size, config.hidden_size, scale);
    }
    w.final_norm.assign(static_cast<size_t>(config.hidden_size), 1.0);
    w.lm_head = draw_matrix(rng, config.hidden_size, config.vocab_size, scale);
    return w;
}

uint64_t weights_checksum(const ModelWeights& weights) {
    Fnv1a64 h;
    checksum_mat(h, weights.embedding);
    for (const auto& layer : weights.layers) {
        checksum_vec(h, layer.attn_norm);
        checksum_vec(h, layer.mlp_norm);
        checksum_mat(h, layer.wq);
        checksum_mat(h, layer.wk);
        checksum_mat(h, layer.wv);
        checksum_mat(h, layer.wo);
        checksum_mat(h, layer.w_gate);
        checksum_mat(h, layer.w_up);
        checksum_mat(h, layer.w_down);
    }
    checksum_vec(h, weights.final_norm);
    checksum_mat(h, weights.lm_head);
    return h.digest();
}

uint64_t model_fingerprint(const ModelConfig& config, const ModelWeights& weights) {
    Fnv1a64 h;
    h.update_u64(config.fingerprint_seed());
    h.update_u64(weights_checksum(weights));
    return h.digest();
}

void save_weights(const std::string& path, const ModelConfig& config, const ModelWeights& weights) {
    std::ostringstream out;
    out.write(kWeightsMagic, 4);
    wire::write_u32(out, kWeightsVersion);
    wire::write_i64(out, config.layer_num);
    wire::write_i64(out, config.head_num);
    wire::write_i64(out, config.kv_head_num);
    wire::write_i64(out, config.head_size);
    wire::write_i64(out, config.hidden_size);
    wire::write_i64(out, config.intermediate_size);
    wire::write_i64(out, config.vocab_size);
    wire::write_f64(out, config.rope_base);
    wire::write_f64(out, config.norm_eps);
    write_mat(out, weights.embedding);
    for (const auto& layer : weights.layers) {
        write_vec(out, layer.attn_norm);
        write_vec(out, layer.mlp_norm);
        write_mat(out, layer.wq);
        write_mat(out, layer.wk);
        write_mat(out, layer.wv);
        write_mat(out, layer.wo);
        write_mat(out, layer.w_gate);
        write_mat(out, layer.w_up);
        write_mat(out, layer.w_down);
    }
    write_vec(out, weights.final_norm);
    write_mat(out, weights.lm_head);
    wire::write_u64(out, weights_checksum(weights));
    wire::atomic_write_file(path, out.str());
}

ModelConfig load_weights(const std::string& path, ModelWeights& weights) {
    std::istringstream in(wire::read_file(path));
    char magic[4];
    wire::read_exact(in, magic, 4, "weights magic");
    if (std::memcmp(magic, kWeightsMagic, 4) != 0) {
        throw FormatError("not a weights file: " + path);
    }
    uint32_t version = wire::read_u32(in, "weights version");
    if (version != kWeightsVersion) {
        throw FormatError("unsupported weights version " + std::to_string(version));
    }
    ModelConfig config;
    config.layer_num = wire::read_i64(in, "weights config");
    config.head_num = wire::read_i64(in, "weights config");
    config.kv_head_num = wire::read_i64(in, "weights config");
    config.head_size = wire::read_i64(in, "weights config");
    config.hidden_size = wire::read_i64(in, "weights config");
    config.intermediate_size = wire::read_i64(in, "weights config");
    config.vocab_size = wire::read_i64(in, "weights config");
    config.rope_base = wire::read_f64(in, "weights config");
    config.norm_eps = wire::read_f64(in, "weights config");
    config.validate();

    ModelWeights w;
    w.embedding = read_mat(in);
    w.layers.resize(static_cast<size_t>(config.layer_num));
    for (auto& layer : w.layers) {
        layer.attn_norm = read_vec(in);
        layer.mlp_norm = read_vec(in);
        layer.wq = read_mat(in);
        layer.wk = read_mat(in);
        layer.wv = read_mat(in);
        layer.wo = read_mat(in);
        layer.w_gate = read_mat(in);
        layer.w_up = read_mat(in);
        layer.w_down = read_mat(in);
    }
    w.final_norm = read_vec(in);
    w.lm_head = read_mat(in);
    uint64_t stored = wire::read_u64(in, "weights checksum");
    if (stored != weights_checksum(w)) {
        throw FormatError("weights checksum mismatch: " + path);
    }
    weights = std::move(w);
    return config;
}

ForwardResult forward_tokens(const ModelConfig& config,
                             const ModelWeights& weights,
                             const std::vector<Token>& tokens,
                             const PositionIds& positions,
                             const AssembledContext* past,
                             const Matrix& mask,
                             FlopCounter* counter) {
    const int64_t t_new = static_cast<int64_t>(tokens.size());
    if (t_new == 0) throw DomainError("forward_tokens: empty token list");
    if (positions.size() != t_new) {
        throw ShapeError("forward_tokens: positions/tokens length mismatch");
    }
    const int64_t t_past = past ? past->total_tokens() : 0;
    if (mask.rows() != t_new || mask.cols() != t_past + t_new) {
        throw ShapeError("forward_tokens: mask must be [new, past+new]");
    }
    if (past && static_cast<int64_t>(past->k.size()) != config.layer_num) {
        throw ShapeError("forward_tokens: past layer count mismatch");
    }
    for (Token id : tokens) {
        if (id < 0 || id >= config.vocab_size) {
            throw DomainError("token id " + std::to_string(id) + " outside vocab");
        }
    }

    const RopeParams rope = RopeParams::create(config.head_size, config.rope_base);

    // Positions of every attendable token, past first.
    PositionIds all_positions;
    if (past) all_positions.ids = past->positions.ids;
    all_positions.ids.insert(all_positions.ids.end(), positions.ids.begin(), positions.ids.end());

    Matrix x(t_new, config.hidden_size);
    for (int64_t i = 0; i < t_new; ++i) {
        const double* src = weights.embedding.row(tokens[static_cast<size_t>(i)]);
        std::copy(src, src + config.hidden_size, x.row(i));
    }

    ForwardResult result;
    result.k.reserve(static_cast<size_t>(config.layer_num));
    result.v.reserve(static_cast<size_t>(config.layer_num));

    for (int64_t l = 0; l < config.layer_num; ++l) {
        const LayerWeights& layer = weights.layers[static_cast<size_t>(l)];

        Matrix h = rmsnorm_rows(x, layer.attn_norm, config.norm_eps);
        Matrix q = matmul(h, layer.wq);
        Matrix k_new = matmul(h, layer.wk); // kept unrotated
        Matrix v_new = matmul(h, layer.wv);

        Matrix k_all = past ? vstack(past->k[static_cast<size_t>(l)], k_new) : k_new;
        Matrix v_all = past ? vstack(past->v[static_cast<size_t>(l)], v_new) : v_new;

        // Rotation is applied to scratch copies; k_new goes into the result
        // untouched so the stored cache carries no position information.
        rope_rotate_heads_inplace(q, positions, rope);
        rope_rotate_heads_inplace(k_all, all_positions, rope);

        Matrix attn = attend(q, k_all, v_all, mask, config.head_size);
        x = add(x, matmul(attn, layer.wo));

        Matrix h2 = rmsnorm_rows(x, layer.mlp_norm, config.norm_eps);
        x = add(x, swiglu_rows(h2, layer.w_gate, layer.w_up, layer.w_down));

        result.k.push_back(std::move(k_new));
        result.v.push_back(std::move(v_new));
    }

    Matrix final_h = rmsnorm_rows(x, weights.final_norm, config.norm_eps);
    result.logits = matmul(final_h, weights.lm_head);
    result.logits.require_finite("logits");

    if (counter) counter->add_forward(config, t_new, t_past + t_new);
    return result;
}

std::vector<Token> greedy_decode(const ModelConfig& config,
                                 const ModelWeights& weights,
                                 AssembledContext& ctx,
                                 int64_t max_new,
                                 Token eos,
                                 FlopCounter* counter) {
    if (max_new < 0) throw DomainError("greedy_decode: negative max_new");
    if (!ctx.prefilled()) throw DomainError("greedy_decode: context has no logits yet");

    std::vector<Token> out;
    for (int64_t step = 0; step < max_new; ++step) {
        const double* logits = ctx.last_logits.row(0);
        Token best = 0;
        for (int64_t id = 1; id < ctx.last_logits.cols(); ++id) {
            if (logits[id] > logits[best]) best = static_cast<Token>(id);
        }
        if (best == eos) break;
        out.push_back(best);

        PositionIds pos = PositionIds::sequential(1, ctx.next_position);
        Matrix mask = causal_rows(1, ctx.total_tokens());
        ForwardResult step_result =
            forward_tokens(config, weights, {best}, pos, &ctx, mask, counter);
        ctx.append(step_result.k, step_result.v, pos);
        ctx.extend_query_segment(1);
        ctx.next_position += 1;
        ctx.last_logits = std::move(step_result.logits);
    }
    return out;
}

} // namespace turbokv
