#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace fusion {

using TokenId = std::int32_t;

// Byte-level vocabulary: ids 0-255 are raw bytes, followed by the specials.
inline constexpr TokenId kBos = 256;
inline constexpr TokenId kEos = 257;
inline constexpr TokenId kPad = 258;
inline constexpr int kVocabSize = 259;

struct TokenSequence {
    std::vector<TokenId> ids;

    std::size_t size() const { return ids.size(); }
    bool empty() const { return ids.empty(); }

    friend bool operator==(const TokenSequence& a, const TokenSequence& b) {
        return a.ids == b.ids;
    }
};

// Half-open range of token indices.
struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }

    friend bool operator==(const TokenSpan& a, const TokenSpan& b) {
        return a.begin == b.begin && a.end == b.end;
    }
};

// BOS followed by the UTF-8 bytes of `text`.
TokenSequence encode(std::string_view text);

// Strips specials and re-interprets the remaining bytes as UTF-8; invalid
// sequences become U+FFFD.
std::string decode(const TokenSequence& tokens);

// Token-index range covering exactly full_text[sub_start..sub_end).
// Offsets are byte offsets, so byte-level tokenization makes this exact:
// token i holds byte i-1 of the text (index 0 is BOS).
TokenSpan span_locate(std::string_view full_text, std::size_t sub_start,
                      std::size_t sub_end);

}  // namespace fusion
