#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace turbokv {

using Token = int32_t;

// Byte-level tokenizer: ids 0..255 are raw bytes, followed by the reserved
// special ids. Deterministic and dependency-free; vocab_size must be >= 259.
namespace tok {

constexpr Token kDocStart = 256;
constexpr Token kDocEnd = 257;
constexpr Token kEos = 258;
constexpr int64_t kVocabSize = 259;

std::vector<Token> encode(const std::string& text);
std::string decode(const std::vector<Token>& tokens);

// [doc_start] payload [doc_end]
std::vector<Token> frame_chunk(const std::vector<Token>& payload);

} // namespace tok

} // namespace turbokv
