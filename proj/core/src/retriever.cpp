#include "hydra/retriever.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace hydra {
namespace {

double idf(std::size_t n_docs, std::size_t df) {
    const auto n = static_cast<double>(n_docs);
    const auto f = static_cast<double>(df);
    return std::log((n - f + 0.5) / (f + 0.5) + 1.0);
}

double term_weight(double term_idf, std::uint32_t tf, std::uint32_t doc_len, double avg_len,
                   Bm25Params p) {
    const auto f = static_cast<double>(tf);
    const double norm = 1.0 - p.b + p.b * static_cast<double>(doc_len) / avg_len;
    return term_idf * (f * (p.k1 + 1.0)) / (f + p.k1 * norm);
}

std::vector<std::string> unique_terms(const Tokenizer& tok, std::string_view query) {
    std::vector<std::string> terms;
    std::unordered_set<std::string> seen;
    for (auto& t : tok.tokenize(query)) {
        if (seen.insert(t).second) {
            terms.push_back(std::move(t));
        }
    }
    return terms;
}

template <typename Docs, typename TextOf>
void index_documents(const Docs& docs, TextOf text_of, const Tokenizer& tok,
                     std::map<std::string, std::vector<Posting>, std::less<>>& postings,
                     std::vector<std::uint32_t>& lengths, double& avg_len) {
    std::uint64_t total = 0;
    for (std::size_t ordinal = 0; ordinal < docs.size(); ++ordinal) {
        const auto tokens = tok.tokenize(text_of(docs[ordinal]));
        std::map<std::string_view, std::uint32_t> tf;
        for (const auto& t : tokens) {
            ++tf[t];
        }
        for (const auto& [term, count] : tf) {
            auto it = postings.find(term);
            if (it == postings.end()) {
                it = postings.emplace(std::string(term), std::vector<Posting>{}).first;
            }
            it->second.push_back({static_cast<std::uint32_t>(ordinal), count});
        }
        lengths.push_back(static_cast<std::uint32_t>(tokens.size()));
        total += tokens.size();
    }
    avg_len = docs.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs.size());
}

}  // namespace

std::size_t HistoryIndex::document_frequency(std::string_view term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? 0 : it->second.size();
}

std::string document_text(const HistoryItem& item) {
    return item.query_text + " " + item.answer_text;
}

HistoryIndex build_index(std::span<const HistoryItem> history, const Tokenizer& tok) {
    HistoryIndex index;
    index.tokenizer_ = tok;
    index_documents(
        history, [](const HistoryItem& item) { return document_text(item); }, tok,
        index.postings_, index.doc_lengths_, index.avg_doc_len_);
    return index;
}

HistoryIndex build_index_from_texts(std::span<const std::string> docs, const Tokenizer& tok) {
    HistoryIndex index;
    index.tokenizer_ = tok;
    index_documents(
        docs, [](const std::string& doc) -> const std::string& { return doc; }, tok,
        index.postings_, index.doc_lengths_, index.avg_doc_len_);
    return index;
}

double bm25_score(const HistoryIndex& index, std::string_view query, std::size_t item_ordinal,
                  Bm25Params params) {
    if (item_ordinal >= index.n_docs()) {
        throw std::out_of_range("bm25_score: ordinal " + std::to_string(item_ordinal) +
                                " out of range for " + std::to_string(index.n_docs()) + " docs");
    }
    double score = 0.0;
    for (const auto& term : unique_terms(index.tokenizer(), query)) {
        auto it = index.postings().find(term);
        if (it == index.postings().end()) {
            continue;
        }
        const auto& list = it->second;
        auto hit = std::lower_bound(
            list.begin(), list.end(), item_ordinal,
            [](const Posting& p, std::size_t ord) { return p.ordinal < ord; });
        if (hit == list.end() || hit->ordinal != item_ordinal) {
            continue;
        }
        score += term_weight(idf(index.n_docs(), list.size()), hit->term_frequency,
                             index.doc_lengths()[item_ordinal], index.avg_doc_len(), params);
    }
    return score;
}

std::vector<ScoredItem> retrieve_top(const HistoryIndex& index, std::string_view query,
                                     std::size_t n, const std::set<std::size_t>& exclude,
                                     Bm25Params params) {
    std::vector<double> scores(index.n_docs(), 0.0);
    for (const auto& term : unique_terms(index.tokenizer(), query)) {
        auto it = index.postings().find(term);
        if (it == index.postings().end()) {
            continue;
        }
        const double term_idf = idf(index.n_docs(), it->second.size());
        for (const Posting& p : it->second) {
            scores[p.ordinal] += term_weight(term_idf, p.term_frequency,
                                             index.doc_lengths()[p.ordinal],
                                             index.avg_doc_len(), params);
        }
    }

    std::vector<ScoredItem> ranked;
    ranked.reserve(scores.size());
    for (std::size_t ord = 0; ord < scores.size(); ++ord) {
        if (!exclude.contains(ord)) {
            ranked.push_back({ord, scores[ord]});
        }
    }
    const std::size_t keep = std::min(n, ranked.size());
    auto better = [](const ScoredItem& a, const ScoredItem& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return a.ordinal < b.ordinal;
    };
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep),
                      ranked.end(), better);
    ranked.resize(keep);
    return ranked;
}

}  // namespace hydra
