#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace hydra {

/// Word tokenizer shared by BM25 retrieval and the text metrics.
///
/// Input is UTF-8. Tokens are maximal runs of code points that are neither
/// whitespace (ASCII and the Unicode space separators) nor punctuation (ASCII,
/// Latin-1, General Punctuation, CJK and full-width punctuation blocks).
/// Punctuation separates tokens and is dropped. Lowercasing covers ASCII and
/// Latin-1 letters; other scripts pass through unchanged.
struct Tokenizer {
    bool lowercase = true;

    [[nodiscard]] std::vector<std::string> tokenize(std::string_view text) const;
};

/// Exact-match normalization: trim, casefold, collapse internal whitespace runs
/// to a single ASCII space.
[[nodiscard]] std::string normalize_answer(std::string_view text);

/// Splits on whitespace only, keeping punctuation attached.
[[nodiscard]] std::vector<std::string> split_whitespace(std::string_view text);

}  // namespace hydra
