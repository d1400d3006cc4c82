#include "hydra/adapter.hpp"

#include "hydra/error.hpp"
#include "hydra/labeling.hpp"
#include "hydra/prompts.hpp"
#include "hydra/reranker.hpp"

namespace hydra {

void validate(const AdapterConfig& cfg) {
    if (cfg.b < 1) {
        throw ConfigError("adapter: b must be at least 1");
    }
    if (!(cfg.temperature >= 0.0)) {
        throw ConfigError("adapter: temperature must be non-negative");
    }
}

std::vector<AdapterCandidate> gen_adapter_candidates(const UserRecord& user,
                                                     bool include_main_query) {
    std::vector<AdapterCandidate> out;
    out.reserve(user.history.size() + 1);
    if (include_main_query) {
        if (!user.gold) {
            throw PreconditionError("user " + user.user_id + " has no gold answer for its main query");
        }
        out.push_back({user.query, *user.gold, std::nullopt});
    }
    for (std::size_t i = 0; i < user.history.size(); ++i) {
        out.push_back({user.history[i].query_text, user.history[i].answer_text, i});
    }
    return out;
}

std::vector<std::string> sample_generations(std::string_view query,
                                            std::span<const HistoryItem> context,
                                            const AdapterConfig& cfg, LlmBackend& backend,
                                            const TaskSpec& task) {
    validate(cfg);
    GenerationRequest req{build_rag_prompt(task, context, query).aip, cfg.b, cfg.temperature,
                          cfg.max_tokens, cfg.seed};
    return generate(backend, req);
}

std::vector<AdapterExample> label_adapter_examples(std::string_view user_id, std::string_view query,
                                                   std::string_view gold,
                                                   std::span<const std::string> generations,
                                                   const TaskSpec& task, double rouge_threshold) {
    std::vector<AdapterExample> out;
    out.reserve(generations.size());
    for (const auto& g : generations) {
        out.push_back({std::string(user_id), pair_input(query, g),
                       label_for_task(task, g, gold, rouge_threshold)});
    }
    return out;
}

std::size_t best_of_b_index(std::span<const double> scores) {
    if (scores.empty()) {
        throw PreconditionError("best-of-b needs at least one generation");
    }
    std::size_t best = 0;
    for (std::size_t j = 1; j < scores.size(); ++j) {
        if (scores[j] > scores[best]) {
            best = j;
        }
    }
    return best;
}

GenerationScorer model_scorer(const FactorizedModel& model, std::string head_key) {
    static_cast<void>(model.head(head_key));  // fail early on a missing head
    return [&model, key = std::move(head_key)](std::string_view query, std::string_view generation) {
        return model.score(key, pair_input(query, generation));
    };
}

std::string best_of_b(const FactorizedModel& model, std::string_view head_key,
                      std::string_view query, std::span<const std::string> generations) {
    if (generations.empty()) {
        throw PreconditionError("best-of-b needs at least one generation");
    }
    const auto scorer = model_scorer(model, std::string(head_key));
    std::vector<double> scores;
    scores.reserve(generations.size());
    for (const auto& g : generations) {
        scores.push_back(scorer(query, g));
    }
    return generations[best_of_b_index(scores)];
}

std::vector<RoutedExample> to_routed(std::span<const AdapterExample> examples,
                                     std::string_view shared_key) {
    std::vector<RoutedExample> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) {
        out.push_back({shared_key.empty() ? ex.user_id : std::string(shared_key), ex.x, ex.y});
    }
    return out;
}

}  // namespace hydra
