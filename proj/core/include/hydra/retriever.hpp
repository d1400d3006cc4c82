#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hydra/datamodel.hpp"
#include "hydra/text.hpp"

namespace hydra {

struct Posting {
    std::uint32_t ordinal;
    std::uint32_t term_frequency;

    bool operator==(const Posting&) const = default;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct ScoredItem {
    std::size_t ordinal;
    double score;

    bool operator==(const ScoredItem&) const = default;
};

/// Inverted index over one user's history. Each document is the item's
/// query text followed by its answer text. Immutable once built.
class HistoryIndex {
  public:
    HistoryIndex() = default;

    [[nodiscard]] std::size_t n_docs() const noexcept { return doc_lengths_.size(); }
    [[nodiscard]] double avg_doc_len() const noexcept { return avg_doc_len_; }
    [[nodiscard]] const std::vector<std::uint32_t>& doc_lengths() const noexcept {
        return doc_lengths_;
    }
    [[nodiscard]] const std::map<std::string, std::vector<Posting>, std::less<>>& postings()
        const noexcept {
        return postings_;
    }
    [[nodiscard]] const Tokenizer& tokenizer() const noexcept { return tokenizer_; }

    /// Document frequency of an already-normalized term.
    [[nodiscard]] std::size_t document_frequency(std::string_view term) const;

    friend HistoryIndex build_index(std::span<const HistoryItem> history, const Tokenizer& tok);
    friend HistoryIndex build_index_from_texts(std::span<const std::string> docs,
                                               const Tokenizer& tok);

  private:
    Tokenizer tokenizer_;
    std::map<std::string, std::vector<Posting>, std::less<>> postings_;
    std::vector<std::uint32_t> doc_lengths_;
    double avg_doc_len_ = 0.0;
};

/// Document text used for an item: query text, a space, answer text.
[[nodiscard]] std::string document_text(const HistoryItem& item);

[[nodiscard]] HistoryIndex build_index(std::span<const HistoryItem> history,
                                       const Tokenizer& tok = {});

/// Indexes raw documents; used where history items are not at hand.
[[nodiscard]] HistoryIndex build_index_from_texts(std::span<const std::string> docs,
                                                  const Tokenizer& tok = {});

/// Okapi BM25 with the non-negative IDF ln((N - df + 0.5) / (df + 0.5) + 1).
/// Repeated query terms count once. Throws std::out_of_range for a bad ordinal.
[[nodiscard]] double bm25_score(const HistoryIndex& index, std::string_view query,
                                std::size_t item_ordinal, Bm25Params params = {});

/// Top-n documents by BM25, highest first, ties broken by lower ordinal.
/// Excluded ordinals never appear; documents with zero score are eligible.
[[nodiscard]] std::vector<ScoredItem> retrieve_top(const HistoryIndex& index,
                                                   std::string_view query, std::size_t n,
                                                   const std::set<std::size_t>& exclude = {},
                                                   Bm25Params params = {});

}  // namespace hydra
