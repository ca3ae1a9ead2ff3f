#include "fusion/tokenizer.hpp"

#include "fusion/errors.hpp"

namespace fusion {

TokenSequence encode(std::string_view text) {
    TokenSequence out;
    out.ids.reserve(text.size() + 1);
    out.ids.push_back(kBos);
    for (unsigned char c : text) out.ids.push_back(static_cast<TokenId>(c));
    return out;
}

namespace {

constexpr const char* kReplacement = "\xEF\xBF\xBD";  // U+FFFD

// UTF-8 re-validation over raw bytes. Each maximal invalid subsequence is
// replaced by a single U+FFFD, following the usual incremental-decoder rule.
std::string sanitize_utf8(const std::string& bytes) {
    std::string out;
    out.reserve(bytes.size());
    std::size_t i = 0;
    const std::size_t n = bytes.size();
    while (i < n) {
        const unsigned char b0 = static_cast<unsigned char>(bytes[i]);
        if (b0 < 0x80) {
            out.push_back(static_cast<char>(b0));
            ++i;
            continue;
        }
        std::size_t need;
        unsigned char lo = 0x80, hi = 0xBF;
        if (b0 >= 0xC2 && b0 <= 0xDF) {
            need = 1;
        } else if (b0 == 0xE0) {
            need = 2;
            lo = 0xA0;
        } else if (b0 >= 0xE1 && b0 <= 0xEC) {
            need = 2;
        } else if (b0 == 0xED) {
            need = 2;
            hi = 0x9F;  // exclude surrogates
        } else if (b0 >= 0xEE && b0 <= 0xEF) {
            need = 2;
        } else if (b0 == 0xF0) {
            need = 3;
            lo = 0x90;
        } else if (b0 >= 0xF1 && b0 <= 0xF3) {
            need = 3;
        } else if (b0 == 0xF4) {
            need = 3;
            hi = 0x8F;
        } else {
            // 0x80-0xC1, 0xF5-0xFF can never start a sequence.
            out += kReplacement;
            ++i;
            continue;
        }
        std::size_t j = i + 1;
        bool ok = true;
        for (std::size_t k = 0; k < need; ++k, ++j) {
            if (j >= n) {
                ok = false;
                break;
            }
            const unsigned char c = static_cast<unsigned char>(bytes[j]);
            const unsigned char clo = (k == 0) ? lo : 0x80;
            const unsigned char chi = (k == 0) ? hi : 0xBF;
            if (c < clo || c > chi) {
                ok = false;
                break;
            }
        }
        if (ok) {
            out.append(bytes, i, need + 1);
            i += need + 1;
        } else {
            // One replacement for the maximal valid subpart (lead byte plus
            // continuations up to j); the offending byte is re-examined as a
            // fresh lead. j > i always, so this makes progress.
            out += kReplacement;
            i = j;
        }
    }
    return out;
}

}  // namespace

std::string decode(const TokenSequence& tokens) {
    std::string bytes;
    bytes.reserve(tokens.size());
    for (TokenId id : tokens.ids) {
        if (id >= 0 && id < 256) bytes.push_back(static_cast<char>(id));
    }
    return sanitize_utf8(bytes);
}

TokenSpan span_locate(std::string_view full_text, std::size_t sub_start,
                      std::size_t sub_end) {
    if (!(sub_start < sub_end && sub_end <= full_text.size())) {
        throw InputError("span_locate: offsets out of range");
    }
    // Byte i of the text is token i+1 (index 0 is BOS).
    return TokenSpan{sub_start + 1, sub_end + 1};
}

}  // namespace fusion
