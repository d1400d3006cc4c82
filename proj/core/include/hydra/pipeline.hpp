#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hydra/adapter.hpp"
#include "hydra/audit.hpp"
#include "hydra/config.hpp"
#include "hydra/datamodel.hpp"
#include "hydra/factorized_model.hpp"
#include "hydra/llm_backend.hpp"
#include "hydra/llm_cache.hpp"
#include "hydra/metrics.hpp"
#include "hydra/reranker.hpp"

namespace hydra {

/// Head key every user is routed to when a component runs without
/// personalization.
inline constexpr std::string_view kSharedHeadKey = "__shared__";

[[nodiscard]] std::string reranker_head_key(const RunConfig& cfg, std::string_view user_id);
[[nodiscard]] std::string adapter_head_key(const RunConfig& cfg, std::string_view user_id);

/// Loads the configured dataset, or generates the synthetic one, and applies
/// the optional re-split.
[[nodiscard]] Dataset prepare_dataset(const RunConfig& cfg);

/// The configured backend, optionally behind a response cache.
class BackendStack {
  public:
    /// The simulator uses TemplateOracle unless `oracle` is given.
    explicit BackendStack(const RunConfig& cfg,
                          std::shared_ptr<const ResponseOracle> oracle = nullptr);
    ~BackendStack();

    [[nodiscard]] LlmBackend& backend() noexcept;
    /// Requests that reached the underlying backend.
    [[nodiscard]] std::size_t backend_calls() const noexcept;
    [[nodiscard]] const LlmCache* cache() const noexcept { return cache_.get(); }

  private:
    std::unique_ptr<LlmBackend> inner_;
    std::unique_ptr<LlmCache> cache_;
    std::unique_ptr<CachingBackend> caching_;
};

struct RerankerData {
    std::vector<RerankerCandidate> candidates;
    std::vector<RerankerExample> examples;
};

/// Candidate construction and LLM labeling for the given (training) users.
[[nodiscard]] RerankerData gen_reranker_data(const RunConfig& cfg, const TaskSpec& task,
                                             std::span<const UserRecord> users,
                                             LlmBackend& backend);

/// New reranker model trained on the examples (routed to one shared head
/// under the no_personal_reranker ablation).
[[nodiscard]] FactorizedModel train_reranker(const RunConfig& cfg,
                                             std::span<const RerankerExample> examples);

/// Fits a fresh head per test user on labeled candidates from the user's own
/// history, base frozen. A no-op returning no data under the ablation.
RerankerData fit_reranker(const RunConfig& cfg, const TaskSpec& task, FactorizedModel& model,
                          std::span<const UserRecord> users, LlmBackend& backend);

/// Context for each user's main query: reranked when a model is given,
/// otherwise plain BM25 top-k.
[[nodiscard]] std::vector<ContextRecord> select_contexts(const RunConfig& cfg,
                                                         const FactorizedModel* reranker,
                                                         std::span<const UserRecord> users);

/// Generation and labeling of adapter examples. With `include_main_query`
/// the users' own (query, gold) pairs are used as well as every history pair.
[[nodiscard]] std::vector<AdapterExample> gen_adapter_data(const RunConfig& cfg,
                                                           const TaskSpec& task,
                                                           const FactorizedModel* reranker,
                                                           std::span<const UserRecord> users,
                                                           LlmBackend& backend,
                                                           bool include_main_query = true);

[[nodiscard]] FactorizedModel train_adapter(const RunConfig& cfg,
                                            std::span<const AdapterExample> examples);

/// Fits a fresh adapter head per test user on examples from their history
/// pairs. A no-op returning no data under the ablation.
std::vector<AdapterExample> fit_adapter(const RunConfig& cfg, const TaskSpec& task,
                                        FactorizedModel& adapter, const FactorizedModel* reranker,
                                        std::span<const UserRecord> users, LlmBackend& backend);

/// Overrides the adapter's score of a (query, generation) pair for a user.
using UserScorer = std::function<double(const UserRecord& user, std::string_view query,
                                        std::string_view generation)>;

struct InferenceOutput {
    std::vector<GenerationRecord> generations;
    std::vector<Prediction> predictions;
};

/// Answers each user's query from its context. With an adapter (or scorer
/// override) b samples are drawn and the best-scoring one kept; otherwise one
/// temperature-0 generation is used.
[[nodiscard]] InferenceOutput infer(const RunConfig& cfg, const TaskSpec& task,
                                    std::span<const UserRecord> users,
                                    std::span<const ContextRecord> contexts,
                                    const FactorizedModel* adapter, LlmBackend& backend,
                                    const UserScorer& scorer_override = {});

/// Task metrics over predictions; every prediction needs a gold.
[[nodiscard]] MetricReport evaluate(const TaskSpec& task, std::span<const Prediction> predictions);

struct PhaseTiming {
    std::string phase;
    double seconds = 0.0;
};

struct RunArtifacts {
    RerankerData reranker_train;
    RerankerData reranker_fit;
    std::vector<ContextRecord> contexts;
    std::vector<AdapterExample> adapter_examples;
    std::vector<AdapterExample> adapter_fit_examples;
    std::vector<GenerationRecord> generations;
    std::vector<Prediction> predictions;
};

struct RunResult {
    MetricReport report;
    RunArtifacts artifacts;
    std::vector<PhaseTiming> timings;
    std::optional<FactorizedModel> reranker;
    std::optional<FactorizedModel> adapter;
};

struct PipelineHooks {
    /// Replaces the adapter head at inference; adapter training is skipped.
    UserScorer adapter_scorer;
};

/// Baseline modes: zero_shot, icl_random (k random items), rag (BM25 top-k)
/// and pag (profile summary plus BM25 top-k). One temperature-0 generation
/// per test user.
[[nodiscard]] RunResult run_baseline(const RunConfig& cfg, const Dataset& ds, LlmBackend& backend);

/// The reranker and adapter phases in order, as selected by the mode and
/// ablation flags.
[[nodiscard]] RunResult run_hydra(const RunConfig& cfg, const Dataset& ds, LlmBackend& backend,
                                  const PipelineHooks& hooks = {});

/// Dispatches on the mode.
[[nodiscard]] RunResult run(const RunConfig& cfg, const Dataset& ds, LlmBackend& backend,
                            const PipelineHooks& hooks = {});

/// Writes audit dumps, metrics.json, metrics.txt, config.txt and models into
/// `dir`; timings go to the separate timings.json.
void write_run_outputs(const std::filesystem::path& dir, const RunConfig& cfg,
                       const RunResult& result);

}  // namespace hydra
