#include "turbokv/kvstore.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "turbokv/errors.hpp"
#include "turbokv/rng.hpp"
#include "turbokv/wire.hpp"

namespace turbokv {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'T', 'K', 'V', 'C'};
constexpr uint32_t kVersion = 1;

// magic, version, dtype, layer_num, kv_dim, head_size, token_count,
// config_fingerprint, chunk_id.
constexpr uint64_t kHeaderBytes = 4 + 4 + 4 + 4 + 4 + 4 + 4 + 8 + 8;

std::string hex_id(uint64_t id) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<size_t>(i)] = digits[id & 0xF];
        id >>= 4;
    }
    return s;
}

void write_tensor(std::ostream& out, const Matrix& m, StoreDtype dtype) {
    if (dtype == StoreDtype::F64) {
        for (int64_t i = 0; i < m.size(); ++i) wire::write_f64(out, m.data()[i]);
    } else {
        for (int64_t i = 0; i < m.size(); ++i) {
            wire::write_f32(out, static_cast<float>(m.data()[i]));
        }
    }
}

Matrix read_tensor(std::istream& in, int64_t rows, int64_t cols, StoreDtype dtype) {
    Matrix m(rows, cols);
    if (dtype == StoreDtype::F64) {
        for (int64_t i = 0; i < m.size(); ++i) m.data()[i] = wire::read_f64(in, "chunk tensor");
    } else {
        for (int64_t i = 0; i < m.size(); ++i) {
            m.data()[i] = static_cast<double>(wire::read_f32(in, "chunk tensor"));
        }
    }
    return m;
}

} // namespace

uint64_t chunk_content_id(const std::vector<Token>& framed_tokens, uint64_t model_fingerprint) {
    Fnv1a64 h;
    h.update_u64(model_fingerprint);
    h.update_u64(static_cast<uint64_t>(framed_tokens.size()));
    for (Token t : framed_tokens) h.update_u32(static_cast<uint32_t>(t));
    return h.digest();
}

CacheStore::CacheStore(std::string root, StoreDtype dtype)
    : root_(std::move(root)), dtype_(dtype) {
    if (root_.empty()) throw ConfigError("cache store root must not be empty");
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) throw IoError("cannot create store root " + root_ + ": " + ec.message());
}

std::string CacheStore::path_for(uint64_t chunk_id) const {
    return (fs::path(root_) / (hex_id(chunk_id) + ".tkvc")).string();
}

uint64_t CacheStore::store(const ChunkKVCache& chunk) {
    if (chunk.k.empty() || chunk.k.size() != chunk.v.size()) {
        throw ShapeError("chunk store: K/V layer lists empty or mismatched");
    }
    const int64_t layer_num = static_cast<int64_t>(chunk.k.size());
    const int64_t kv_dim = chunk.kv_head_num * chunk.head_size;
    if (kv_dim <= 0 || chunk.k[0].cols() != kv_dim) {
        throw ShapeError("chunk store: kv_head_num * head_size disagrees with tensors");
    }
    for (int64_t l = 0; l < layer_num; ++l) {
        const Matrix& k = chunk.k[static_cast<size_t>(l)];
        const Matrix& v = chunk.v[static_cast<size_t>(l)];
        if (k.rows() != chunk.token_count || v.rows() != chunk.token_count ||
            k.cols() != kv_dim || v.cols() != kv_dim) {
            throw ShapeError("chunk store: tensor shape mismatch at layer " + std::to_string(l));
        }
    }

    const std::string path = path_for(chunk.chunk_id);
    if (fs::exists(path)) return 0;

    const uint64_t elem = dtype_ == StoreDtype::F64 ? 8 : 4;
    const uint64_t tensor_bytes = static_cast<uint64_t>(chunk.token_count) *
                                  static_cast<uint64_t>(kv_dim) * elem;

    std::ostringstream out;
    out.write(kMagic, 4);
    wire::write_u32(out, kVersion);
    wire::write_u32(out, static_cast<uint32_t>(dtype_));
    wire::write_u32(out, static_cast<uint32_t>(layer_num));
    wire::write_u32(out, static_cast<uint32_t>(chunk.kv_head_num));
    wire::write_u32(out, static_cast<uint32_t>(chunk.head_size));
    wire::write_u32(out, static_cast<uint32_t>(chunk.token_count));
    wire::write_u64(out, chunk.config_fingerprint);
    wire::write_u64(out, chunk.chunk_id);
    // Absolute offsets of each layer's K then V block, in file order.
    uint64_t cursor = kHeaderBytes + static_cast<uint64_t>(layer_num) * 16;
    for (int64_t l = 0; l < layer_num; ++l) {
        wire::write_u64(out, cursor);
        cursor += tensor_bytes;
        wire::write_u64(out, cursor);
        cursor += tensor_bytes;
    }
    for (int64_t l = 0; l < layer_num; ++l) {
        write_tensor(out, chunk.k[static_cast<size_t>(l)], dtype_);
        write_tensor(out, chunk.v[static_cast<size_t>(l)], dtype_);
    }

    std::string payload = out.str();
    if (payload.size() != cursor) {
        throw IoError("chunk store: serialized size disagrees with offsets");
    }
    wire::atomic_write_file(path, payload);
    return payload.size();
}

ChunkKVCache CacheStore::load(uint64_t chunk_id, uint64_t expected_fingerprint) const {
    const std::string path = path_for(chunk_id);
    std::string raw;
    try {
        raw = wire::read_file(path);
    } catch (const NotFoundError&) {
        throw NotFoundError("chunk " + hex_id(chunk_id) + " not in store " + root_);
    }
    std::istringstream in(raw);

    char magic[4];
    wire::read_exact(in, magic, 4, "chunk magic");
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("not a chunk cache file: " + path);
    }
    uint32_t version = wire::read_u32(in, "chunk version");
    if (version != kVersion) {
        throw FormatError("unsupported chunk version " + std::to_string(version));
    }
    uint32_t dtype_raw = wire::read_u32(in, "chunk dtype");
    if (dtype_raw != static_cast<uint32_t>(StoreDtype::F64) &&
        dtype_raw != static_cast<uint32_t>(StoreDtype::F32)) {
        throw FormatError("unknown chunk dtype " + std::to_string(dtype_raw));
    }
    StoreDtype dtype = static_cast<StoreDtype>(dtype_raw);
    uint32_t layer_num = wire::read_u32(in, "chunk header");
    uint32_t kv_head_num = wire::read_u32(in, "chunk header");
    uint32_t head_size = wire::read_u32(in, "chunk header");
    uint32_t token_count = wire::read_u32(in, "chunk header");
    uint64_t fingerprint = wire::read_u64(in, "chunk header");
    uint64_t stored_id = wire::read_u64(in, "chunk header");

    if (stored_id != chunk_id) {
        throw FormatError("chunk id mismatch in " + path);
    }
    if (fingerprint != expected_fingerprint) {
        throw StaleCacheError("chunk " + hex_id(chunk_id) +
                              " was built under a different model fingerprint");
    }
    if (layer_num == 0 || kv_head_num == 0 || head_size == 0 || token_count == 0) {
        throw FormatError("chunk header: zero dimension in " + path);
    }
    const uint64_t kv_dim = static_cast<uint64_t>(kv_head_num) * head_size;

    const uint64_t elem = dtype == StoreDtype::F64 ? 8 : 4;
    const uint64_t tensor_bytes = static_cast<uint64_t>(token_count) * kv_dim * elem;
    uint64_t cursor = kHeaderBytes + static_cast<uint64_t>(layer_num) * 16;
    std::vector<uint64_t> offsets(static_cast<size_t>(layer_num) * 2);
    for (auto& off : offsets) {
        off = wire::read_u64(in, "chunk offsets");
    }
    for (auto off : offsets) {
        if (off != cursor) throw FormatError("chunk offsets table corrupt in " + path);
        cursor += tensor_bytes;
    }
    if (raw.size() != cursor) {
        throw FormatError("chunk file size mismatch in " + path);
    }

    ChunkKVCache chunk;
    chunk.chunk_id = chunk_id;
    chunk.token_count = token_count;
    chunk.kv_head_num = kv_head_num;
    chunk.head_size = head_size;
    chunk.config_fingerprint = fingerprint;
    chunk.format_version = version;
    chunk.k.reserve(layer_num);
    chunk.v.reserve(layer_num);
    for (uint32_t l = 0; l < layer_num; ++l) {
        chunk.k.push_back(read_tensor(in, token_count, static_cast<int64_t>(kv_dim), dtype));
        chunk.v.push_back(read_tensor(in, token_count, static_cast<int64_t>(kv_dim), dtype));
    }
    return chunk;
}

bool CacheStore::contains(uint64_t chunk_id) const {
    return fs::exists(path_for(chunk_id));
}

std::vector<uint64_t> CacheStore::ids() const {
    std::vector<uint64_t> out;
    for (const auto& entry : fs::directory_iterator(root_)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".tkvc") continue;
        const std::string stem = entry.path().stem().string();
        if (stem.size() != 16) continue;
        uint64_t id = 0;
        bool ok = true;
        for (char c : stem) {
            int d;
            if (c >= '0' && c <= '9') d = c - '0';
            else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
            else { ok = false; break; }
            id = (id << 4) | static_cast<uint64_t>(d);
        }
        if (ok) out.push_back(id);
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace turbokv
