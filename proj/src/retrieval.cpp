#include "turbokv/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "turbokv/errors.hpp"
#include "turbokv/rng.hpp"
#include "turbokv/wire.hpp"

namespace turbokv {

namespace {

bool is_space_byte(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

uint64_t bigram_hash(Token a, Token b) {
    Fnv1a64 h;
    h.update_u32(static_cast<uint32_t>(a));
    h.update_u32(static_cast<uint32_t>(b));
    return h.digest();
}

constexpr char kIndexMagic[4] = {'T', 'K', 'V', 'I'};
constexpr uint32_t kIndexVersion = 1;

} // namespace

std::vector<std::vector<Token>> chunk_document(const std::string& text, int64_t target_len) {
    if (target_len < 8) {
        throw DomainError("chunk_document: target_len must be >= 8");
    }
    std::vector<std::vector<Token>> out;
    size_t pos = 0;
    const size_t n = text.size();
    const size_t window = static_cast<size_t>(target_len);
    while (pos < n) {
        size_t take = std::min(window, n - pos);
        if (pos + take < n) {
            // Prefer the last whitespace in the window; it stays with the
            // left chunk so concatenation is lossless.
            size_t split = std::string::npos;
            for (size_t i = take; i > 0; --i) {
                if (is_space_byte(static_cast<unsigned char>(text[pos + i - 1]))) {
                    split = i;
                    break;
                }
            }
            if (split != std::string::npos) take = split;
        }
        out.push_back(tok::encode(text.substr(pos, take)));
        pos += take;
    }
    return out;
}

std::vector<double> embed(const std::vector<Token>& tokens, int64_t dim) {
    if (tokens.empty()) throw DomainError("embed: empty token list");
    if (dim < 1) throw DomainError("embed: dimension must be >= 1");
    std::vector<double> v(static_cast<size_t>(dim), 0.0);
    Token prev = -1; // sentinel precedes the first token
    for (Token t : tokens) {
        const uint64_t h = bigram_hash(prev, t);
        const size_t bucket = static_cast<size_t>(h % static_cast<uint64_t>(dim));
        const double sign = (h >> 63) ? -1.0 : 1.0;
        v[bucket] += sign;
        prev = t;
    }
    double ss = 0.0;
    for (double x : v) ss += x * x;
    if (ss == 0.0) {
        // Signed counts cancelled exactly; pin a deterministic direction so
        // the unit-norm invariant still holds.
        v[0] = 1.0;
        ss = 1.0;
    }
    const double inv = 1.0 / std::sqrt(ss);
    for (double& x : v) x *= inv;
    return v;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ShapeError("cosine: dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw DomainError("cosine: zero vector");
    return dot / std::sqrt(na * nb);
}

bool RetrievalIndex::add(ChunkRecord record) {
    if (contains(record.chunk_id)) return false;
    records_.push_back(std::move(record));
    return true;
}

bool RetrievalIndex::contains(uint64_t chunk_id) const {
    for (const auto& r : records_) {
        if (r.chunk_id == chunk_id) return true;
    }
    return false;
}

const ChunkRecord& RetrievalIndex::get(uint64_t chunk_id) const {
    for (const auto& r : records_) {
        if (r.chunk_id == chunk_id) return r;
    }
    throw NotFoundError("chunk id not indexed");
}

std::vector<uint64_t> RetrievalIndex::top_k(const std::vector<double>& query_embedding,
                                            int64_t k) const {
    if (k < 1) throw DomainError("top_k: k must be >= 1");
    if (records_.empty()) throw DomainError("top_k: empty index");
    std::vector<std::pair<double, uint64_t>> scored;
    scored.reserve(records_.size());
    for (const auto& r : records_) {
        scored.emplace_back(cosine(query_embedding, r.embedding), r.chunk_id);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    const size_t take = std::min(static_cast<size_t>(k), scored.size());
    std::vector<uint64_t> out(take);
    for (size_t i = 0; i < take; ++i) out[i] = scored[i].second;
    return out;
}

void RetrievalIndex::save(const std::string& path, uint64_t model_fingerprint) const {
    std::ostringstream out;
    out.write(kIndexMagic, 4);
    wire::write_u32(out, kIndexVersion);
    wire::write_u64(out, model_fingerprint);
    wire::write_u64(out, static_cast<uint64_t>(records_.size()));
    for (const auto& r : records_) {
        wire::write_u64(out, r.chunk_id);
        wire::write_u32(out, static_cast<uint32_t>(r.doc_id.size()));
        out.write(r.doc_id.data(), static_cast<std::streamsize>(r.doc_id.size()));
        wire::write_u32(out, static_cast<uint32_t>(r.tokens.size()));
        for (Token t : r.tokens) wire::write_u32(out, static_cast<uint32_t>(t));
        wire::write_u32(out, static_cast<uint32_t>(r.embedding.size()));
        for (double x : r.embedding) wire::write_f64(out, x);
    }
    wire::atomic_write_file(path, out.str());
}

RetrievalIndex RetrievalIndex::load(const std::string& path, uint64_t expected_fingerprint) {
    std::istringstream in(wire::read_file(path));
    char magic[4];
    wire::read_exact(in, magic, 4, "index magic");
    if (std::memcmp(magic, kIndexMagic, 4) != 0) {
        throw FormatError("not an index file: " + path);
    }
    uint32_t version = wire::read_u32(in, "index version");
    if (version != kIndexVersion) {
        throw FormatError("unsupported index version " + std::to_string(version));
    }
    uint64_t fingerprint = wire::read_u64(in, "index fingerprint");
    if (fingerprint != expected_fingerprint) {
        throw StaleCacheError("index " + path + " was built under a different model fingerprint");
    }
    uint64_t count = wire::read_u64(in, "index count");
    RetrievalIndex index;
    for (uint64_t i = 0; i < count; ++i) {
        ChunkRecord r;
        r.chunk_id = wire::read_u64(in, "index record");
        uint32_t id_len = wire::read_u32(in, "index record");
        r.doc_id.resize(id_len);
        if (id_len > 0) wire::read_exact(in, r.doc_id.data(), id_len, "index record");
        uint32_t tok_count = wire::read_u32(in, "index record");
        r.tokens.resize(tok_count);
        for (uint32_t t = 0; t < tok_count; ++t) {
            r.tokens[t] = static_cast<Token>(wire::read_u32(in, "index record"));
        }
        uint32_t dim = wire::read_u32(in, "index record");
        r.embedding.resize(dim);
        for (uint32_t d = 0; d < dim; ++d) {
            r.embedding[d] = wire::read_f64(in, "index record");
        }
        index.add(std::move(r));
    }
    return index;
}

} // namespace turbokv
