#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "turbokv/errors.hpp"

namespace turbokv {
namespace wire {

// Little-endian scalar framing shared by every on-disk format. Explicit byte
// shuffling keeps the files byte-identical across hosts.

inline void write_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& out, uint64_t v) {
    write_u32(out, static_cast<uint32_t>(v));
    write_u32(out, static_cast<uint32_t>(v >> 32));
}

inline void write_i64(std::ostream& out, int64_t v) {
    write_u64(out, static_cast<uint64_t>(v));
}

inline void write_f64(std::ostream& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    write_u64(out, bits);
}

inline void write_f32(std::ostream& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    write_u32(out, bits);
}

inline void read_exact(std::istream& in, void* dst, size_t n, const char* what) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in.gcount()) != n) {
        throw FormatError(std::string(what) + ": truncated");
    }
}

inline uint32_t read_u32(std::istream& in, const char* what) {
    unsigned char b[4];
    read_exact(in, b, 4, what);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline uint64_t read_u64(std::istream& in, const char* what) {
    uint64_t lo = read_u32(in, what);
    uint64_t hi = read_u32(in, what);
    return lo | (hi << 32);
}

inline int64_t read_i64(std::istream& in, const char* what) {
    return static_cast<int64_t>(read_u64(in, what));
}

inline double read_f64(std::istream& in, const char* what) {
    uint64_t bits = read_u64(in, what);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

inline float read_f32(std::istream& in, const char* what) {
    uint32_t bits = read_u32(in, what);
    float v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

// Writes `payload` to `path` via a sibling temp file and an atomic rename,
// so readers never observe a partial file.
void atomic_write_file(const std::string& path, const std::string& payload);

// Whole-file read; NotFoundError if absent, IoError on other failures.
std::string read_file(const std::string& path);

} // namespace wire
} // namespace turbokv
