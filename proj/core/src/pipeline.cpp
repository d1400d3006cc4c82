#include "hydra/pipeline.hpp"

#include <chrono>
#include <numeric>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "hydra/error.hpp"
#include "hydra/http_backend.hpp"
#include "hydra/model_io.hpp"
#include "hydra/prompts.hpp"
#include "hydra/random.hpp"
#include "hydra/retriever.hpp"

namespace hydra {
namespace {

class PhaseClock {
  public:
    PhaseClock(std::vector<PhaseTiming>& sink, std::string phase)
        : sink_(sink), phase_(std::move(phase)), start_(std::chrono::steady_clock::now()) {
        spdlog::info("phase {} started", phase_);
    }
    ~PhaseClock() {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        sink_.push_back({phase_, secs});
        spdlog::info("phase {} finished in {:.3f} s", phase_, secs);
    }
    PhaseClock(const PhaseClock&) = delete;
    PhaseClock& operator=(const PhaseClock&) = delete;

  private:
    std::vector<PhaseTiming>& sink_;
    std::string phase_;
    std::chrono::steady_clock::time_point start_;
};

RerankConfig rerank_config(const RunConfig& cfg, std::string_view label) {
    RerankConfig rc = cfg.rerank;
    rc.seed = derive_seed(cfg.seed, label);
    return rc;
}

AdapterConfig adapter_config(const RunConfig& cfg, std::string_view label) {
    AdapterConfig ac = cfg.adapter;
    ac.max_tokens = cfg.max_tokens;
    ac.seed = derive_seed(cfg.seed, label);
    return ac;
}

LabelingConfig labeling_config(const RunConfig& cfg, std::string_view label) {
    LabelingConfig lc;
    lc.temperature = cfg.labeling_temperature;
    lc.max_tokens = cfg.max_tokens;
    lc.seed = derive_seed(cfg.seed, label);
    lc.rouge_threshold = cfg.rouge_threshold;
    lc.max_in_flight = cfg.max_in_flight;
    return lc;
}

ContextRecord bm25_context(const UserRecord& user, std::string_view query, std::size_t k,
                           const std::set<std::size_t>& exclude = {}) {
    ContextRecord rec{user.user_id, std::string(query), {}, {}};
    const HistoryIndex index = build_index(user.history);
    for (const auto& hit : retrieve_top(index, query, k, exclude)) {
        rec.ordinals.push_back(hit.ordinal);
        rec.scores.push_back(hit.score);
    }
    return rec;
}

// Context for an arbitrary query of a user: reranked when the reranker has a
// head for the user, BM25 top-k otherwise.
ContextRecord context_for(const RunConfig& cfg, const FactorizedModel* reranker,
                          const UserRecord& user, std::string_view query,
                          const std::set<std::size_t>& exclude = {}) {
    if (reranker != nullptr) {
        const std::string key = reranker_head_key(cfg, user.user_id);
        if (reranker->has_head(key)) {
            ContextRecord rec{user.user_id, std::string(query), {}, {}};
            for (const auto& r : rerank_ranked(*reranker, key, query, user.history, cfg.rerank, exclude)) {
                rec.ordinals.push_back(r.ordinal);
                rec.scores.push_back(r.score);
            }
            return rec;
        }
        spdlog::warn("reranker has no head for user {}; using BM25 order", user.user_id);
    }
    return bm25_context(user, query, cfg.rerank.k, exclude);
}

std::vector<HistoryItem> items_of(const UserRecord& user, const ContextRecord& ctx) {
    std::vector<HistoryItem> items;
    items.reserve(ctx.ordinals.size());
    for (std::size_t o : ctx.ordinals) {
        if (o >= user.history.size()) {
            throw DataError("context for user " + user.user_id + " names history item " +
                            std::to_string(o) + " of " + std::to_string(user.history.size()));
        }
        items.push_back(user.history[o]);
    }
    return items;
}

void require_gold(std::span<const UserRecord> users) {
    for (const auto& u : users) {
        if (!u.gold) {
            throw DataError("test user " + u.user_id + " has no gold answer to evaluate against");
        }
    }
}

}  // namespace

std::string reranker_head_key(const RunConfig& cfg, std::string_view user_id) {
    return cfg.no_personal_reranker ? std::string(kSharedHeadKey) : std::string(user_id);
}

std::string adapter_head_key(const RunConfig& cfg, std::string_view user_id) {
    return cfg.no_personal_adapter ? std::string(kSharedHeadKey) : std::string(user_id);
}

Dataset prepare_dataset(const RunConfig& cfg) {
    Dataset ds;
    if (cfg.data_path.empty()) {
        SyntheticOptions opts;
        opts.noise_rate = cfg.synth_noise;
        opts.n_test = cfg.synth_test;
        ds = make_synthetic_task(cfg.synth_users, cfg.synth_history, derive_seed(cfg.seed, "synthetic"),
                                 opts);
    } else {
        ds = load_dataset(cfg.data_path, task_spec(cfg.task));
    }
    if (cfg.n_train != 0 || cfg.n_test != 0) {
        ds = split_users(ds, cfg.n_train, cfg.n_test, derive_seed(cfg.seed, "split"));
    }
    return ds;
}

BackendStack::BackendStack(const RunConfig& cfg, std::shared_ptr<const ResponseOracle> oracle) {
    if (cfg.backend == BackendKind::simulator) {
        if (!oracle) {
            oracle = std::make_shared<TemplateOracle>(task_spec(cfg.task), cfg.simulator_context_weight);
        }
        inner_ = std::make_unique<SimulatorBackend>(std::move(oracle));
    } else {
        HttpConfig http = cfg.http;
        http.max_in_flight = cfg.max_in_flight;
        inner_ = std::make_unique<HttpBackend>(std::move(http));
    }
    // The decorator stays in place with caching off so backend calls are still counted.
    cache_ = cfg.cache_enabled && !cfg.cache_path.empty() ? std::make_unique<LlmCache>(cfg.cache_path)
                                                          : std::make_unique<LlmCache>();
    caching_ = std::make_unique<CachingBackend>(
        *inner_, *cache_, CachePolicy{cfg.cache_enabled, cfg.cache_bypass_zero_temperature});
}

BackendStack::~BackendStack() = default;

LlmBackend& BackendStack::backend() noexcept { return *caching_; }

std::size_t BackendStack::backend_calls() const noexcept { return caching_->backend_calls(); }

RerankerData gen_reranker_data(const RunConfig& cfg, const TaskSpec& task,
                               std::span<const UserRecord> users, LlmBackend& backend) {
    RerankerData data;
    const RerankConfig rc = rerank_config(cfg, "reranker.candidates");
    for (const auto& user : users) {
        auto cands = gen_reranker_candidates(user, rc, true);
        data.candidates.insert(data.candidates.end(), std::make_move_iterator(cands.begin()),
                               std::make_move_iterator(cands.end()));
    }
    data.examples = label_reranker_candidates(data.candidates, backend, task,
                                              labeling_config(cfg, "reranker.labels"));
    return data;
}

FactorizedModel train_reranker(const RunConfig& cfg, std::span<const RerankerExample> examples) {
    FactorizedModel model(cfg.encoder, derive_seed(cfg.seed, "reranker.model"));
    const auto routed =
        to_routed(examples, cfg.no_personal_reranker ? kSharedHeadKey : std::string_view{});
    if (cfg.no_personal_reranker) {
        model.ensure_head(std::string(kSharedHeadKey));
    }
    const auto losses =
        train_model(model, routed, cfg.reranker_train, derive_seed(cfg.seed, "reranker.shuffle"));
    if (!losses.empty()) {
        spdlog::info("reranker training loss {:.4f} -> {:.4f}", losses.front(), losses.back());
    }
    return model;
}

RerankerData fit_reranker(const RunConfig& cfg, const TaskSpec& task, FactorizedModel& model,
                          std::span<const UserRecord> users, LlmBackend& backend) {
    RerankerData data;
    if (cfg.no_personal_reranker) {
        return data;
    }
    const RerankConfig rc = rerank_config(cfg, "reranker.fit.candidates");
    std::vector<std::size_t> offsets{0};
    for (const auto& user : users) {
        auto cands = gen_reranker_candidates(user, rc, false);
        data.candidates.insert(data.candidates.end(), std::make_move_iterator(cands.begin()),
                               std::make_move_iterator(cands.end()));
        offsets.push_back(data.candidates.size());
    }
    data.examples = label_reranker_candidates(data.candidates, backend, task,
                                              labeling_config(cfg, "reranker.fit.labels"));
    for (std::size_t u = 0; u < users.size(); ++u) {
        std::vector<TextExample> own;
        for (std::size_t i = offsets[u]; i < offsets[u + 1]; ++i) {
            own.push_back({data.examples[i].x, data.examples[i].y});
        }
        fit_new_head(model, users[u].user_id, own, cfg.reranker_train);
    }
    return data;
}

std::vector<ContextRecord> select_contexts(const RunConfig& cfg, const FactorizedModel* reranker,
                                           std::span<const UserRecord> users) {
    std::vector<ContextRecord> out;
    out.reserve(users.size());
    for (const auto& user : users) {
        out.push_back(context_for(cfg, reranker, user, user.query));
    }
    return out;
}

std::vector<AdapterExample> gen_adapter_data(const RunConfig& cfg, const TaskSpec& task,
                                             const FactorizedModel* reranker,
                                             std::span<const UserRecord> users, LlmBackend& backend,
                                             bool include_main_query) {
    const AdapterConfig ac =
        adapter_config(cfg, include_main_query ? "adapter.samples" : "adapter.fit.samples");
    struct Job {
        const UserRecord* user;
        AdapterCandidate cand;
    };
    std::vector<Job> jobs;
    std::vector<GenerationRequest> requests;
    for (const auto& user : users) {
        for (auto& cand : gen_adapter_candidates(user, include_main_query)) {
            std::set<std::size_t> exclude;
            if (cand.history_ordinal) {
                exclude.insert(*cand.history_ordinal);
            }
            const auto ctx = context_for(cfg, reranker, user, cand.query, exclude);
            const auto items = items_of(user, ctx);
            requests.push_back({build_rag_prompt(task, items, cand.query).aip, ac.b, ac.temperature,
                                ac.max_tokens, ac.seed});
            jobs.push_back({&user, std::move(cand)});
        }
    }
    const auto samples = generate_all(backend, requests, cfg.max_in_flight);
    std::vector<AdapterExample> out;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        auto labeled = label_adapter_examples(jobs[i].user->user_id, jobs[i].cand.query,
                                              jobs[i].cand.gold, samples[i], task, cfg.rouge_threshold);
        out.insert(out.end(), std::make_move_iterator(labeled.begin()),
                   std::make_move_iterator(labeled.end()));
    }
    return out;
}

FactorizedModel train_adapter(const RunConfig& cfg, std::span<const AdapterExample> examples) {
    FactorizedModel model(cfg.encoder, derive_seed(cfg.seed, "adapter.model"));
    const auto routed =
        to_routed(examples, cfg.no_personal_adapter ? kSharedHeadKey : std::string_view{});
    if (cfg.no_personal_adapter) {
        model.ensure_head(std::string(kSharedHeadKey));
    }
    const auto losses =
        train_model(model, routed, cfg.adapter_train, derive_seed(cfg.seed, "adapter.shuffle"));
    if (!losses.empty()) {
        spdlog::info("adapter training loss {:.4f} -> {:.4f}", losses.front(), losses.back());
    }
    return model;
}

std::vector<AdapterExample> fit_adapter(const RunConfig& cfg, const TaskSpec& task,
                                        FactorizedModel& adapter, const FactorizedModel* reranker,
                                        std::span<const UserRecord> users, LlmBackend& backend) {
    std::vector<AdapterExample> all;
    if (cfg.no_personal_adapter) {
        return all;
    }
    all = gen_adapter_data(cfg, task, reranker, users, backend, false);
    for (const auto& user : users) {
        std::vector<TextExample> own;
        for (const auto& ex : all) {
            if (ex.user_id == user.user_id) {
                own.push_back({ex.x, ex.y});
            }
        }
        fit_new_head(adapter, user.user_id, own, cfg.adapter_train);
    }
    return all;
}

InferenceOutput infer(const RunConfig& cfg, const TaskSpec& task, std::span<const UserRecord> users,
                      std::span<const ContextRecord> contexts, const FactorizedModel* adapter,
                      LlmBackend& backend, const UserScorer& scorer_override) {
    if (contexts.size() != users.size()) {
        throw DataError("got " + std::to_string(contexts.size()) + " contexts for " +
                        std::to_string(users.size()) + " users");
    }
    const bool best_of = adapter != nullptr || static_cast<bool>(scorer_override);
    const AdapterConfig ac = adapter_config(cfg, "infer.samples");
    std::vector<GenerationRequest> requests;
    for (std::size_t u = 0; u < users.size(); ++u) {
        if (contexts[u].user_id != users[u].user_id) {
            throw DataError("context order does not match users at position " + std::to_string(u));
        }
        const auto items = items_of(users[u], contexts[u]);
        GenerationRequest req{build_rag_prompt(task, items, users[u].query).aip, 1, 0.0,
                              cfg.max_tokens, ac.seed};
        if (best_of) {
            req.n_samples = ac.b;
            req.temperature = ac.temperature;
        }
        requests.push_back(std::move(req));
    }
    const auto samples = generate_all(backend, requests, cfg.max_in_flight);

    InferenceOutput out;
    for (std::size_t u = 0; u < users.size(); ++u) {
        const auto& user = users[u];
        GenerationRecord rec{user.user_id, user.query, samples[u], {}, 0};
        if (best_of) {
            GenerationScorer scorer;
            if (scorer_override) {
                scorer = [&](std::string_view q, std::string_view g) { return scorer_override(user, q, g); };
            } else {
                scorer = model_scorer(*adapter, adapter_head_key(cfg, user.user_id));
            }
            for (const auto& g : rec.generations) {
                rec.scores.push_back(scorer(user.query, g));
            }
            rec.chosen = best_of_b_index(rec.scores);
        }
        out.predictions.push_back({user.user_id, user.query, user.gold, rec.generations[rec.chosen]});
        out.generations.push_back(std::move(rec));
    }
    return out;
}

MetricReport evaluate(const TaskSpec& task, std::span<const Prediction> predictions) {
    std::vector<std::string> preds;
    std::vector<std::string> golds;
    for (const auto& p : predictions) {
        if (!p.gold) {
            throw DataError("prediction for user " + p.user_id + " has no gold answer");
        }
        preds.push_back(p.prediction);
        golds.push_back(*p.gold);
    }
    return evaluate_predictions(task, preds, golds);
}

RunResult run_baseline(const RunConfig& cfg, const Dataset& ds, LlmBackend& backend) {
    if (!is_baseline(cfg.mode)) {
        throw ConfigError("run_baseline called with mode " + std::string(to_string(cfg.mode)));
    }
    validate(cfg);
    require_gold(ds.test_users);
    RunResult result;
    const TaskSpec& task = ds.task;
    const auto users = std::span<const UserRecord>(ds.test_users);
    const std::size_t k = cfg.rerank.k;
    auto& contexts = result.artifacts.contexts;
    {
        PhaseClock clock(result.timings, "context");
        for (const auto& user : users) {
            switch (cfg.mode) {
                case Mode::zero_shot:
                    contexts.push_back({user.user_id, user.query, {}, {}});
                    break;
                case Mode::icl_random: {
                    std::vector<std::size_t> order(user.history.size());
                    std::iota(order.begin(), order.end(), std::size_t{0});
                    Rng rng(hash_combine(derive_seed(cfg.seed, "icl_random"), fnv1a64(user.user_id)));
                    rng.shuffle(std::span<std::size_t>(order));
                    order.resize(std::min(k, order.size()));
                    contexts.push_back({user.user_id, user.query, order,
                                        std::vector<double>(order.size(), 0.0)});
                    break;
                }
                case Mode::rag:
                case Mode::pag:
                    contexts.push_back(bm25_context(user, user.query, k));
                    break;
                default:
                    break;
            }
        }
    }

    std::vector<std::string> summaries(users.size());
    if (cfg.mode == Mode::pag) {
        PhaseClock clock(result.timings, "summaries");
        std::vector<GenerationRequest> requests;
        for (const auto& user : users) {
            requests.push_back({build_pag_summary_prompt(task, user.history), 1, 0.0, cfg.max_tokens,
                                derive_seed(cfg.seed, "pag.summary")});
        }
        const auto out = generate_all(backend, requests, cfg.max_in_flight);
        for (std::size_t u = 0; u < users.size(); ++u) {
            summaries[u] = out[u].front();
        }
    }

    {
        PhaseClock clock(result.timings, "infer");
        std::vector<GenerationRequest> requests;
        for (std::size_t u = 0; u < users.size(); ++u) {
            const auto items = items_of(users[u], contexts[u]);
            std::string prompt = build_rag_prompt(task, items, users[u].query).aip;
            if (cfg.mode == Mode::pag) {
                prompt = compose_pag_prompt(summaries[u], prompt);
            }
            requests.push_back({std::move(prompt), 1, 0.0, cfg.max_tokens,
                                derive_seed(cfg.seed, "baseline")});
        }
        const auto out = generate_all(backend, requests, cfg.max_in_flight);
        for (std::size_t u = 0; u < users.size(); ++u) {
            result.artifacts.generations.push_back({users[u].user_id, users[u].query, out[u], {}, 0});
            result.artifacts.predictions.push_back(
                {users[u].user_id, users[u].query, users[u].gold, out[u].front()});
        }
    }
    {
        PhaseClock clock(result.timings, "evaluate");
        result.report = evaluate(task, result.artifacts.predictions);
    }
    return result;
}

RunResult run_hydra(const RunConfig& cfg, const Dataset& ds, LlmBackend& backend,
                    const PipelineHooks& hooks) {
    if (is_baseline(cfg.mode)) {
        throw ConfigError("run_hydra called with mode " + std::string(to_string(cfg.mode)));
    }
    validate(cfg);
    require_gold(ds.train_users);
    require_gold(ds.test_users);
    RunResult result;
    auto& art = result.artifacts;
    const TaskSpec& task = ds.task;
    const auto train = std::span<const UserRecord>(ds.train_users);
    const auto test = std::span<const UserRecord>(ds.test_users);

    // Each finished phase is flushed to the output directory so that a later
    // failure leaves the earlier artifacts behind.
    const std::filesystem::path& dir = cfg.output_dir;
    if (!dir.empty()) {
        std::filesystem::create_directories(dir);
    }
    auto persist = [&dir](const char* name, const auto& rows) {
        if (!dir.empty()) {
            write_jsonl(dir / name, std::span(rows));
        }
    };

    if (uses_reranker(cfg.mode)) {
        {
            PhaseClock clock(result.timings, "reranker.datagen");
            art.reranker_train = gen_reranker_data(cfg, task, train, backend);
        }
        persist("reranker_candidates.jsonl", art.reranker_train.candidates);
        persist("reranker_examples.jsonl", art.reranker_train.examples);
        {
            PhaseClock clock(result.timings, "reranker.train");
            result.reranker.emplace(train_reranker(cfg, art.reranker_train.examples));
        }
        {
            PhaseClock clock(result.timings, "reranker.fit");
            art.reranker_fit = fit_reranker(cfg, task, *result.reranker, test, backend);
        }
        persist("reranker_fit_candidates.jsonl", art.reranker_fit.candidates);
        persist("reranker_fit_examples.jsonl", art.reranker_fit.examples);
        if (!dir.empty()) {
            save_model(*result.reranker, dir / "reranker.model");
        }
    }
    const FactorizedModel* reranker = result.reranker ? &*result.reranker : nullptr;
    {
        PhaseClock clock(result.timings, "rerank");
        art.contexts = select_contexts(cfg, reranker, test);
    }
    persist("contexts.jsonl", art.contexts);

    const bool adapter_on = uses_adapter(cfg.mode);
    if (adapter_on && !hooks.adapter_scorer) {
        {
            PhaseClock clock(result.timings, "adapter.datagen");
            art.adapter_examples = gen_adapter_data(cfg, task, reranker, train, backend, true);
        }
        persist("adapter_examples.jsonl", art.adapter_examples);
        {
            PhaseClock clock(result.timings, "adapter.train");
            result.adapter.emplace(train_adapter(cfg, art.adapter_examples));
        }
        {
            PhaseClock clock(result.timings, "adapter.fit");
            art.adapter_fit_examples = fit_adapter(cfg, task, *result.adapter, reranker, test, backend);
        }
        persist("adapter_fit_examples.jsonl", art.adapter_fit_examples);
        if (!dir.empty()) {
            save_model(*result.adapter, dir / "adapter.model");
        }
    }
    {
        PhaseClock clock(result.timings, "infer");
        auto out = infer(cfg, task, test, art.contexts, result.adapter ? &*result.adapter : nullptr,
                         backend, adapter_on ? hooks.adapter_scorer : UserScorer{});
        art.generations = std::move(out.generations);
        art.predictions = std::move(out.predictions);
    }
    {
        PhaseClock clock(result.timings, "evaluate");
        result.report = evaluate(task, art.predictions);
    }
    return result;
}

RunResult run(const RunConfig& cfg, const Dataset& ds, LlmBackend& backend,
              const PipelineHooks& hooks) {
    return is_baseline(cfg.mode) ? run_baseline(cfg, ds, backend) : run_hydra(cfg, ds, backend, hooks);
}

void write_run_outputs(const std::filesystem::path& dir, const RunConfig& cfg,
                       const RunResult& result) {
    std::filesystem::create_directories(dir);
    const auto& art = result.artifacts;
    write_jsonl(dir / "reranker_candidates.jsonl",
                std::span<const RerankerCandidate>(art.reranker_train.candidates));
    write_jsonl(dir / "reranker_examples.jsonl",
                std::span<const RerankerExample>(art.reranker_train.examples));
    write_jsonl(dir / "reranker_fit_candidates.jsonl",
                std::span<const RerankerCandidate>(art.reranker_fit.candidates));
    write_jsonl(dir / "reranker_fit_examples.jsonl",
                std::span<const RerankerExample>(art.reranker_fit.examples));
    write_jsonl(dir / "contexts.jsonl", std::span<const ContextRecord>(art.contexts));
    write_jsonl(dir / "adapter_examples.jsonl", std::span<const AdapterExample>(art.adapter_examples));
    write_jsonl(dir / "adapter_fit_examples.jsonl",
                std::span<const AdapterExample>(art.adapter_fit_examples));
    write_jsonl(dir / "generations.jsonl", std::span<const GenerationRecord>(art.generations));
    write_jsonl(dir / "predictions.jsonl", std::span<const Prediction>(art.predictions));
    write_text(dir / "metrics.json", result.report.to_json() + "\n");
    write_text(dir / "metrics.txt", result.report.to_text());
    write_text(dir / "config.txt", to_config_text(cfg));
    if (result.reranker) {
        save_model(*result.reranker, dir / "reranker.model");
    }
    if (result.adapter) {
        save_model(*result.adapter, dir / "adapter.model");
    }
    nlohmann::ordered_json timings = nlohmann::ordered_json::array();
    for (const auto& t : result.timings) {
        timings.push_back({{"phase", t.phase}, {"seconds", t.seconds}});
    }
    write_text(dir / "timings.json", timings.dump(2) + "\n");
}

}  // namespace hydra
