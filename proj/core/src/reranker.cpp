#include "hydra/reranker.hpp"

#include <algorithm>
#include <numeric>

#include <spdlog/spdlog.h>

#include "hydra/error.hpp"
#include "hydra/labeling.hpp"
#include "hydra/prompts.hpp"
#include "hydra/random.hpp"
#include "hydra/retriever.hpp"

namespace hydra {

void validate(const RerankConfig& cfg) {
    if (cfg.M < 1) {
        throw ConfigError("reranker: M must be at least 1");
    }
    if (cfg.k > cfg.N) {
        throw ConfigError("reranker: k must not exceed N");
    }
}

std::string pair_input(std::string_view query, std::string_view text) {
    std::string x = "[CLS] ";
    x.append(query).append(" [SEP] ").append(text).append(" [SEP]");
    return x;
}

std::string_view to_string(Provenance p) noexcept {
    return p == Provenance::main_query ? "main_query" : "sampled_history";
}

Provenance parse_provenance(std::string_view name) {
    if (name == "main_query") {
        return Provenance::main_query;
    }
    if (name == "sampled_history") {
        return Provenance::sampled_history;
    }
    throw DataError("unknown provenance \"" + std::string(name) + "\"");
}

std::vector<RerankerCandidate> gen_reranker_candidates(const UserRecord& user,
                                                       const RerankConfig& cfg,
                                                       bool include_main_query) {
    validate(cfg);
    std::vector<RerankerCandidate> out;
    const auto& history = user.history;
    if (history.size() < 2) {
        spdlog::warn("user {}: {} history item(s), skipping reranker candidates", user.user_id,
                     history.size());
        return out;
    }
    if (include_main_query && !user.gold) {
        throw PreconditionError("user " + user.user_id + " has no gold answer for its main query");
    }
    const HistoryIndex index = build_index(history);
    auto emit = [&](const std::string& query, const std::string& gold, std::size_t ordinal,
                    Provenance provenance) {
        out.push_back({user.user_id, query, gold, ordinal, history[ordinal], provenance});
    };

    if (include_main_query) {
        for (const auto& hit : retrieve_top(index, user.query, cfg.M)) {
            emit(user.query, *user.gold, hit.ordinal, Provenance::main_query);
        }
    }

    std::vector<std::size_t> order(history.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(hash_combine(cfg.seed, fnv1a64(user.user_id)));
    rng.shuffle(std::span<std::size_t>(order));
    const std::size_t n_sampled = std::min(cfg.M, history.size());
    for (std::size_t s = 0; s < n_sampled; ++s) {
        const HistoryItem& anchor = history[order[s]];
        for (const auto& hit : retrieve_top(index, anchor.query_text, cfg.M, {order[s]})) {
            emit(anchor.query_text, anchor.answer_text, hit.ordinal, Provenance::sampled_history);
        }
    }
    return out;
}

std::vector<RerankerExample> label_reranker_candidates(std::span<const RerankerCandidate> candidates,
                                                       LlmBackend& backend, const TaskSpec& task,
                                                       const LabelingConfig& cfg) {
    std::vector<GenerationRequest> requests;
    requests.reserve(candidates.size());
    for (const auto& c : candidates) {
        const HistoryItem* item = &c.item;
        requests.push_back({build_rag_prompt(task, std::span<const HistoryItem>(item, 1), c.query).aip,
                            1, cfg.temperature, cfg.max_tokens, cfg.seed});
    }
    const auto responses = generate_all(backend, requests, cfg.max_in_flight);
    std::vector<RerankerExample> out;
    out.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        out.push_back({c.user_id, pair_input(c.query, document_text(c.item)),
                       label_for_task(task, responses[i].front(), c.gold, cfg.rouge_threshold),
                       c.provenance});
    }
    return out;
}

std::vector<RankedItem> select_topk(std::span<const RankedItem> items, std::size_t k) {
    std::vector<RankedItem> sorted(items.begin(), items.end());
    const auto better = [](const RankedItem& a, const RankedItem& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return a.bm25_rank < b.bm25_rank;
    };
    const std::size_t n = std::min(k, sorted.size());
    std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n), sorted.end(),
                      better);
    sorted.resize(n);
    return sorted;
}

std::vector<RankedItem> rerank_ranked(const FactorizedModel& model, std::string_view head_key,
                                      std::string_view query, std::span<const HistoryItem> history,
                                      const RerankConfig& cfg, const std::set<std::size_t>& exclude) {
    validate(cfg);
    const HeadParams& head = model.head(head_key);
    const HistoryIndex index = build_index(history);
    const auto hits = retrieve_top(index, query, cfg.N, exclude);
    std::vector<RankedItem> ranked;
    ranked.reserve(hits.size());
    for (std::size_t r = 0; r < hits.size(); ++r) {
        const auto& item = history[hits[r].ordinal];
        const Vector p = head_forward(head, model.encode(pair_input(query, document_text(item))));
        ranked.push_back({hits[r].ordinal, r, hits[r].score, p[1]});
    }
    return select_topk(ranked, cfg.k);
}

std::vector<HistoryItem> rerank_topk(const FactorizedModel& model, std::string_view head_key,
                                     std::string_view query, std::span<const HistoryItem> history,
                                     const RerankConfig& cfg, const std::set<std::size_t>& exclude) {
    std::vector<HistoryItem> out;
    for (const auto& r : rerank_ranked(model, head_key, query, history, cfg, exclude)) {
        out.push_back(history[r.ordinal]);
    }
    return out;
}

std::vector<HistoryItem> bm25_topk(std::string_view query, std::span<const HistoryItem> history,
                                   std::size_t k, const std::set<std::size_t>& exclude) {
    const HistoryIndex index = build_index(history);
    std::vector<HistoryItem> out;
    for (const auto& hit : retrieve_top(index, query, k, exclude)) {
        out.push_back(history[hit.ordinal]);
    }
    return out;
}

std::vector<RoutedExample> to_routed(std::span<const RerankerExample> examples,
                                     std::string_view shared_key) {
    std::vector<RoutedExample> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) {
        out.push_back({shared_key.empty() ? ex.user_id : std::string(shared_key), ex.x, ex.y});
    }
    return out;
}

}  // namespace hydra
