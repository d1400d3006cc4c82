#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hydra/datamodel.hpp"
#include "hydra/factorized_model.hpp"
#include "hydra/llm_backend.hpp"

namespace hydra {

struct AdapterConfig {
    std::size_t b = 8;  // samples per query
    double temperature = 1.0;
    std::size_t max_tokens = 64;
    std::uint64_t seed = 0;

    bool operator==(const AdapterConfig&) const = default;
};

/// Throws ConfigError unless b >= 1 and temperature >= 0.
void validate(const AdapterConfig& cfg);

/// A (query, gold) pair to generate for. History pairs remember their
/// position so their own item can be left out of the context.
struct AdapterCandidate {
    std::string query;
    std::string gold;
    std::optional<std::size_t> history_ordinal;

    bool operator==(const AdapterCandidate&) const = default;
};

/// The main query and gold first (when `include_main_query`), then every
/// history pair in history order. A missing gold with `include_main_query`
/// throws PreconditionError.
[[nodiscard]] std::vector<AdapterCandidate> gen_adapter_candidates(const UserRecord& user,
                                                                   bool include_main_query = true);

/// b samples for the query, prompted with the given context items.
[[nodiscard]] std::vector<std::string> sample_generations(std::string_view query,
                                                          std::span<const HistoryItem> context,
                                                          const AdapterConfig& cfg,
                                                          LlmBackend& backend,
                                                          const TaskSpec& task);

struct AdapterExample {
    std::string user_id;
    std::string x;
    int y = 0;

    bool operator==(const AdapterExample&) const = default;
};

/// One example per generation, labeled against the gold.
[[nodiscard]] std::vector<AdapterExample> label_adapter_examples(
    std::string_view user_id, std::string_view query, std::string_view gold,
    std::span<const std::string> generations, const TaskSpec& task, double rouge_threshold = 0.5);

/// Index of the highest score, lowest index among ties. Throws
/// PreconditionError for an empty list.
[[nodiscard]] std::size_t best_of_b_index(std::span<const double> scores);

/// Maps (query, generation) to a preference score.
using GenerationScorer = std::function<double(std::string_view query, std::string_view generation)>;

/// Scorer backed by the head under `head_key`. The model must outlive it.
[[nodiscard]] GenerationScorer model_scorer(const FactorizedModel& model, std::string head_key);

/// Scores every generation with p[1] of the head and returns the best one.
/// Throws PreconditionError for empty generations, RoutingError without a head.
[[nodiscard]] std::string best_of_b(const FactorizedModel& model, std::string_view head_key,
                                    std::string_view query,
                                    std::span<const std::string> generations);

[[nodiscard]] std::vector<RoutedExample> to_routed(std::span<const AdapterExample> examples,
                                                   std::string_view shared_key = {});

}  // namespace hydra
