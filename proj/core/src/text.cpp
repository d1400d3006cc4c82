#include "hydra/text.hpp"

#include <cstdint>

namespace hydra {
namespace {

struct CodePoint {
    char32_t value;
    std::size_t length;  // bytes consumed
};

// Lenient decoder: malformed sequences decode byte-by-byte as their own value
// so they survive tokenization instead of being dropped.
CodePoint decode(std::string_view s, std::size_t i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    auto cont = [&](std::size_t k) {
        return i + k < s.size() && (static_cast<unsigned char>(s[i + k]) & 0xC0U) == 0x80U;
    };
    auto bits = [&](std::size_t k) {
        return static_cast<char32_t>(static_cast<unsigned char>(s[i + k]) & 0x3FU);
    };
    if (b0 < 0x80U) {
        return {b0, 1};
    }
    if ((b0 & 0xE0U) == 0xC0U && cont(1)) {
        return {(static_cast<char32_t>(b0 & 0x1FU) << 6) | bits(1), 2};
    }
    if ((b0 & 0xF0U) == 0xE0U && cont(1) && cont(2)) {
        return {(static_cast<char32_t>(b0 & 0x0FU) << 12) | (bits(1) << 6) | bits(2), 3};
    }
    if ((b0 & 0xF8U) == 0xF0U && cont(1) && cont(2) && cont(3)) {
        return {(static_cast<char32_t>(b0 & 0x07U) << 18) | (bits(1) << 12) | (bits(2) << 6) |
                    bits(3),
                4};
    }
    return {b0, 1};
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

bool is_space(char32_t c) {
    switch (c) {
        case U' ': case U'\t': case U'\n': case U'\r': case U'\f': case U'\v':
        case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return c >= 0x2000 && c <= 0x200A;
    }
}

bool is_punct(char32_t c) {
    if (c < 0x80) {
        return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) ||
               (c >= 0x5B && c <= 0x60) || (c >= 0x7B && c <= 0x7E);
    }
    return c == 0xA1 || c == 0xA7 || c == 0xAB || c == 0xB6 || c == 0xB7 || c == 0xBB ||
           c == 0xBF || (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) ||
           (c >= 0x3001 && c <= 0x3003) || (c >= 0x3008 && c <= 0x3011) ||
           (c >= 0xFF01 && c <= 0xFF0F) || (c >= 0xFF1A && c <= 0xFF20);
}

char32_t to_lower(char32_t c) {
    if (c >= U'A' && c <= U'Z') {
        return c + 0x20;
    }
    if (c >= 0xC0 && c <= 0xDE && c != 0xD7) {
        return c + 0x20;
    }
    return c;
}

}  // namespace

std::vector<std::string> Tokenizer::tokenize(std::string_view text) const {
    std::vector<std::string> tokens;
    std::string current;
    for (std::size_t i = 0; i < text.size();) {
        const CodePoint cp = decode(text, i);
        i += cp.length;
        if (is_space(cp.value) || is_punct(cp.value)) {
            if (!current.empty()) {
                tokens.push_back(std::move(current));
                current.clear();
            }
            continue;
        }
        append_utf8(current, lowercase ? to_lower(cp.value) : cp.value);
    }
    if (!current.empty()) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

std::string normalize_answer(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (std::size_t i = 0; i < text.size();) {
        const CodePoint cp = decode(text, i);
        i += cp.length;
        if (is_space(cp.value)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        append_utf8(out, to_lower(cp.value));
    }
    return out;
}

std::vector<std::string> split_whitespace(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    for (std::size_t i = 0; i < text.size();) {
        const CodePoint cp = decode(text, i);
        if (is_space(cp.value)) {
            if (!current.empty()) {
                words.push_back(std::move(current));
                current.clear();
            }
        } else {
            current.append(text.substr(i, cp.length));
        }
        i += cp.length;
    }
    if (!current.empty()) {
        words.push_back(std::move(current));
    }
    return words;
}

}  // namespace hydra
