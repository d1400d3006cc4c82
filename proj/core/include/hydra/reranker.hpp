#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hydra/datamodel.hpp"
#include "hydra/factorized_model.hpp"
#include "hydra/llm_backend.hpp"

namespace hydra {

struct RerankConfig {
    std::size_t M = 4;   // retrieval depth when building training candidates
    std::size_t N = 20;  // retrieval depth at inference
    std::size_t k = 4;   // items kept after reranking
    std::uint64_t seed = 0;

    bool operator==(const RerankConfig&) const = default;
};

/// Throws ConfigError unless M >= 1 and k <= N.
void validate(const RerankConfig& cfg);

/// Scoring input for a (query, text) pair: "[CLS] q [SEP] text [SEP]".
[[nodiscard]] std::string pair_input(std::string_view query, std::string_view text);

enum class Provenance { main_query, sampled_history };
[[nodiscard]] std::string_view to_string(Provenance p) noexcept;
[[nodiscard]] Provenance parse_provenance(std::string_view name);

/// One (query, gold, history item) triple to be labeled.
struct RerankerCandidate {
    std::string user_id;
    std::string query;
    std::string gold;
    std::size_t item_ordinal = 0;  // position of the paired item in the history
    HistoryItem item;
    Provenance provenance = Provenance::main_query;

    bool operator==(const RerankerCandidate&) const = default;
};

/// Training candidates for one user. The main query contributes its top-M
/// BM25 items (when `include_main_query`); then min(M, |H|) history items are
/// sampled without replacement and each, with its own answer as gold, is
/// paired with the top-M items retrieved from the rest of the history.
/// Users with fewer than two history items are skipped with a warning. A
/// missing gold with `include_main_query` throws PreconditionError.
[[nodiscard]] std::vector<RerankerCandidate> gen_reranker_candidates(
    const UserRecord& user, const RerankConfig& cfg, bool include_main_query = true);

struct RerankerExample {
    std::string user_id;
    std::string x;
    int y = 0;
    Provenance provenance = Provenance::main_query;

    bool operator==(const RerankerExample&) const = default;
};

struct LabelingConfig {
    double temperature = 1.0;
    std::size_t max_tokens = 64;
    std::uint64_t seed = 0;
    double rouge_threshold = 0.5;
    std::size_t max_in_flight = 4;
};

/// Asks the backend for one answer per candidate, prompted with the candidate
/// item as the only profile entry, and labels it against the candidate gold.
/// Backend failures propagate with the candidate index in the message.
[[nodiscard]] std::vector<RerankerExample> label_reranker_candidates(
    std::span<const RerankerCandidate> candidates, LlmBackend& backend, const TaskSpec& task,
    const LabelingConfig& cfg);

/// A retrieved item with its retriever rank and learned usefulness score.
struct RankedItem {
    std::size_t ordinal = 0;
    std::size_t bm25_rank = 0;
    double bm25_score = 0.0;
    double score = 0.0;
};

/// The k highest-scoring items, ties broken by lower BM25 rank. The result
/// does not depend on the input order.
[[nodiscard]] std::vector<RankedItem> select_topk(std::span<const RankedItem> items, std::size_t k);

/// BM25 top-N over the history (minus `exclude`), each scored with the head
/// under `head_key`, reduced to the top k. Throws RoutingError without a head.
[[nodiscard]] std::vector<RankedItem> rerank_ranked(const FactorizedModel& model,
                                                    std::string_view head_key,
                                                    std::string_view query,
                                                    std::span<const HistoryItem> history,
                                                    const RerankConfig& cfg,
                                                    const std::set<std::size_t>& exclude = {});

/// The history items chosen by rerank_ranked, best first.
[[nodiscard]] std::vector<HistoryItem> rerank_topk(const FactorizedModel& model,
                                                   std::string_view head_key,
                                                   std::string_view query,
                                                   std::span<const HistoryItem> history,
                                                   const RerankConfig& cfg,
                                                   const std::set<std::size_t>& exclude = {});

/// BM25 top-k without reranking, as history items.
[[nodiscard]] std::vector<HistoryItem> bm25_topk(std::string_view query,
                                                 std::span<const HistoryItem> history,
                                                 std::size_t k,
                                                 const std::set<std::size_t>& exclude = {});

/// Routes each example to its user's head, or every example to `shared_key`
/// when that is non-empty.
[[nodiscard]] std::vector<RoutedExample> to_routed(std::span<const RerankerExample> examples,
                                                   std::string_view shared_key = {});

}  // namespace hydra
