#include "turbokv/tokenizer.hpp"

#include "turbokv/errors.hpp"

namespace turbokv {
namespace tok {

std::vector<Token> encode(const std::string& text) {
    std::vector<Token> out;
    out.reserve(text.size());
    for (unsigned char c : text) {
        out.push_back(static_cast<Token>(c));
    }
    return out;
}

std::string decode(const std::vector<Token>& tokens) {
    std::string out;
    out.reserve(tokens.size());
    for (Token t : tokens) {
        if (t >= 0 && t < 256) {
            out.push_back(static_cast<char>(t));
        } else if (t == kDocStart) {
            out += "<|doc_start|>";
        } else if (t == kDocEnd) {
            out += "<|doc_end|>";
        } else if (t == kEos) {
            // end of sequence renders as nothing
        } else {
            throw DomainError("decode: unknown token id " + std::to_string(t));
        }
    }
    return out;
}

std::vector<Token> frame_chunk(const std::vector<Token>& payload) {
    std::vector<Token> framed;
    framed.reserve(payload.size() + 2);
    framed.push_back(kDocStart);
    framed.insert(framed.end(), payload.begin(), payload.end());
    framed.push_back(kDocEnd);
    return framed;
}

} // namespace tok
} // namespace turbokv
