#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <mutex>

#include <unistd.h>

#include "hydra/error.hpp"
#include "hydra/model_io.hpp"
#include "hydra/pipeline.hpp"
#include "hydra/prompts.hpp"

namespace hydra {
namespace {

namespace fs = std::filesystem;

RunConfig small_config(Mode mode = Mode::hydra_full) {
    RunConfig cfg;
    cfg.mode = mode;
    cfg.synth_users = 6;
    cfg.synth_history = 8;
    cfg.synth_test = 2;
    cfg.encoder = {512, 8, 2};
    cfg.reranker_train = {0.1, 2, 16};
    cfg.adapter_train = {0.1, 2, 16};
    cfg.adapter.b = 4;
    cfg.seed = 3;
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// Records every prompt it answers, then defers to the template oracle.
class RecordingOracle final : public ResponseOracle {
  public:
    explicit RecordingOracle(TaskSpec task) : inner_(std::move(task)) {}
    std::string respond(std::string_view prompt, double temperature, double u) const override {
        std::lock_guard lock(mutex_);
        prompts.emplace_back(prompt);
        return inner_.respond(prompt, temperature, u);
    }
    mutable std::vector<std::string> prompts;

  private:
    TemplateOracle inner_;
    mutable std::mutex mutex_;
};

class PipelineRun : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("hydra_pipeline_" + std::to_string(::getpid()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    fs::path dir_;
};

TEST(HeadKeys, AblationRoutesToSharedHead) {
    RunConfig cfg;
    EXPECT_EQ(reranker_head_key(cfg, "u1"), "u1");
    cfg.no_personal_reranker = true;
    EXPECT_EQ(reranker_head_key(cfg, "u1"), kSharedHeadKey);
    EXPECT_EQ(adapter_head_key(cfg, "u1"), "u1");
    cfg.no_personal_adapter = true;
    EXPECT_EQ(adapter_head_key(cfg, "u1"), kSharedHeadKey);
}

TEST(PrepareDataset, SyntheticUsesConfiguredSizes) {
    const Dataset ds = prepare_dataset(small_config());
    EXPECT_EQ(ds.train_users.size(), 4U);
    EXPECT_EQ(ds.test_users.size(), 2U);
    EXPECT_EQ(ds.test_users[0].history.size(), 8U);
}

TEST(Baselines, ZeroShotWithEchoOracleIsPerfect) {
    RunConfig cfg = small_config(Mode::zero_shot);
    cfg.synth_test = 1;
    const Dataset ds = prepare_dataset(cfg);
    BackendStack stack(cfg, std::make_shared<EchoOracle>(ds.task, ds));
    const RunResult r = run(cfg, ds, stack.backend());
    EXPECT_EQ(r.report.at("accuracy"), 1.0);
}

TEST(Baselines, IclRandomWithNoItemsMatchesZeroShot) {
    RunConfig zero = small_config(Mode::zero_shot);
    RunConfig icl = small_config(Mode::icl_random);
    icl.rerank.k = 0;
    const Dataset ds = prepare_dataset(zero);
    BackendStack s1(zero), s2(icl);
    EXPECT_EQ(run(zero, ds, s1.backend()).artifacts.predictions,
              run(icl, ds, s2.backend()).artifacts.predictions);
}

TEST(Baselines, RagPromptsCarryExactlyKEntries) {
    RunConfig cfg = small_config(Mode::rag);
    const Dataset ds = prepare_dataset(cfg);
    auto oracle = std::make_shared<RecordingOracle>(ds.task);
    BackendStack stack(cfg, oracle);
    static_cast<void>(run(cfg, ds, stack.backend()));
    ASSERT_EQ(oracle->prompts.size(), ds.test_users.size());
    for (const auto& p : oracle->prompts) {
        EXPECT_EQ(parse_prompt(ds.task, p).context.size(), 4U);
    }
}

TEST(Baselines, PagPrependsSummary) {
    RunConfig cfg = small_config(Mode::pag);
    const Dataset ds = prepare_dataset(cfg);
    auto oracle = std::make_shared<RecordingOracle>(ds.task);
    BackendStack stack(cfg, oracle);
    const RunResult r = run(cfg, ds, stack.backend());
    ASSERT_EQ(oracle->prompts.size(), 2 * ds.test_users.size());
    std::size_t with_summary = 0;
    for (const auto& p : oracle->prompts) {
        with_summary += p.rfind(kSimulatedSummaryPrefix, 0) == 0 ? 1 : 0;
    }
    EXPECT_EQ(with_summary, ds.test_users.size());
    EXPECT_EQ(r.artifacts.predictions.size(), ds.test_users.size());
}

TEST(Hydra, RerankerOnlyAnswersFromRerankedContext) {
    RunConfig cfg = small_config(Mode::hydra_reranker_only);
    const Dataset ds = prepare_dataset(cfg);
    auto oracle = std::make_shared<RecordingOracle>(ds.task);
    BackendStack stack(cfg, oracle);
    const RunResult r = run(cfg, ds, stack.backend());
    ASSERT_TRUE(r.reranker.has_value());
    EXPECT_FALSE(r.adapter.has_value());
    const TemplateOracle reference(ds.task);
    for (std::size_t u = 0; u < ds.test_users.size(); ++u) {
        const auto& user = ds.test_users[u];
        const auto expected_items = rerank_topk(*r.reranker, reranker_head_key(cfg, user.user_id), user.query,
                                                user.history, cfg.rerank);
        const auto& ctx = r.artifacts.contexts[u];
        ASSERT_EQ(ctx.ordinals.size(), expected_items.size());
        for (std::size_t i = 0; i < ctx.ordinals.size(); ++i) {
            EXPECT_EQ(user.history[ctx.ordinals[i]], expected_items[i]);
        }
        const std::string prompt = build_rag_prompt(ds.task, expected_items, user.query).aip;
        EXPECT_EQ(r.artifacts.predictions[u].prediction, reference.respond(prompt, 0.0, 0.0));
    }
}

TEST(Hydra, AblationKeepsExactlyOneHeadPerComponent) {
    RunConfig cfg = small_config();
    cfg.no_personal_reranker = true;
    cfg.no_personal_adapter = true;
    const Dataset ds = prepare_dataset(cfg);
    BackendStack stack(cfg);
    const RunResult r = run(cfg, ds, stack.backend());
    ASSERT_TRUE(r.reranker && r.adapter);
    EXPECT_EQ(r.reranker->heads().size(), 1U);
    EXPECT_EQ(r.adapter->heads().size(), 1U);
    EXPECT_TRUE(r.adapter->has_head(kSharedHeadKey));
    EXPECT_TRUE(r.artifacts.reranker_fit.examples.empty());
    EXPECT_TRUE(r.artifacts.adapter_fit_examples.empty());
}

TEST(Hydra, PersonalRunHasHeadPerUser) {
    const RunConfig cfg = small_config();
    const Dataset ds = prepare_dataset(cfg);
    BackendStack stack(cfg);
    const RunResult r = run(cfg, ds, stack.backend());
    EXPECT_EQ(r.adapter->heads().size(), ds.size());
    for (const auto& u : ds.test_users) {
        EXPECT_TRUE(r.reranker->has_head(u.user_id));
        EXPECT_TRUE(r.adapter->has_head(u.user_id));
    }
    EXPECT_EQ(r.artifacts.generations.front().generations.size(), cfg.adapter.b);
}

TEST(Hydra, FitPhasesLeaveBaseUntouched) {
    const RunConfig cfg = small_config();
    const Dataset ds = prepare_dataset(cfg);
    BackendStack stack(cfg);
    const auto data = gen_reranker_data(cfg, ds.task, ds.train_users, stack.backend());
    FactorizedModel reranker = train_reranker(cfg, data.examples);
    const std::string base = serialize_base(reranker.base());
    static_cast<void>(fit_reranker(cfg, ds.task, reranker, ds.test_users, stack.backend()));
    EXPECT_EQ(serialize_base(reranker.base()), base);

    const auto examples = gen_adapter_data(cfg, ds.task, &reranker, ds.train_users, stack.backend());
    FactorizedModel adapter = train_adapter(cfg, examples);
    const std::string adapter_base = serialize_base(adapter.base());
    static_cast<void>(fit_adapter(cfg, ds.task, adapter, &reranker, ds.test_users, stack.backend()));
    EXPECT_EQ(serialize_base(adapter.base()), adapter_base);
}

TEST(Hydra, FitRequiresFreshTestUsers) {
    const RunConfig cfg = small_config();
    const Dataset ds = prepare_dataset(cfg);
    BackendStack stack(cfg);
    FactorizedModel reranker = train_reranker(cfg, gen_reranker_data(cfg, ds.task, ds.train_users, stack.backend()).examples);
    EXPECT_THROW(static_cast<void>(fit_reranker(cfg, ds.task, reranker, ds.train_users, stack.backend())),
                 ConflictError);
}

TEST(Hydra, BaselineModeRejectedByRunHydra) {
    const RunConfig cfg = small_config(Mode::rag);
    BackendStack stack(cfg);
    EXPECT_THROW(static_cast<void>(run_hydra(cfg, prepare_dataset(cfg), stack.backend())), ConfigError);
}

TEST_F(PipelineRun, RunsAreByteIdentical) {
    const RunConfig cfg = small_config();
    const Dataset ds = prepare_dataset(cfg);
    for (const char* sub : {"a", "b"}) {
        BackendStack stack(cfg);
        write_run_outputs(dir_ / sub, cfg, run(cfg, ds, stack.backend()));
    }
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(dir_ / "a")) {
        if (entry.path().filename() == "timings.json") {
            continue;
        }
        EXPECT_EQ(slurp(entry.path()), slurp(dir_ / "b" / entry.path().filename())) << entry.path();
        ++compared;
    }
    EXPECT_GE(compared, 12U);
}

TEST_F(PipelineRun, WarmCacheReproducesRunWithoutBackendCalls) {
    RunConfig cfg = small_config();
    cfg.cache_path = dir_ / "cache.jsonl";
    fs::create_directories(dir_);
    const Dataset ds = prepare_dataset(cfg);
    MetricReport cold_report;
    std::size_t cold_calls = 0;
    {
        BackendStack stack(cfg);
        cold_report = run(cfg, ds, stack.backend()).report;
        cold_calls = stack.backend_calls();
    }
    BackendStack warm(cfg);
    EXPECT_EQ(run(cfg, ds, warm.backend()).report, cold_report);
    EXPECT_GT(cold_calls, 0U);
    EXPECT_LT(warm.backend_calls(), cold_calls);
    EXPECT_EQ(warm.backend_calls(), 0U);
}

TEST(Cache, DisabledCacheHasNoHits) {
    RunConfig cfg = small_config(Mode::rag);
    cfg.cache_enabled = false;
    const Dataset ds = prepare_dataset(cfg);
    BackendStack stack(cfg);
    static_cast<void>(run(cfg, ds, stack.backend()));
    static_cast<void>(run(cfg, ds, stack.backend()));
    EXPECT_EQ(stack.cache()->hits(), 0U);
    EXPECT_EQ(stack.backend_calls(), 2 * ds.test_users.size());
}

// Fails every request that asks for b samples, i.e. the adapter phase.
class FailingAdapterBackend final : public LlmBackend {
  public:
    FailingAdapterBackend(LlmBackend& inner, std::size_t b) : inner_(inner), b_(b) {}
    BackendKind kind() const noexcept override { return inner_.kind(); }
    std::string model_name() const override { return inner_.model_name(); }
    std::vector<std::string> generate(const GenerationRequest& req) override {
        if (req.n_samples == b_) {
            throw TransportError("provider unavailable");
        }
        return inner_.generate(req);
    }

  private:
    LlmBackend& inner_;
    std::size_t b_;
};

TEST_F(PipelineRun, FailedPhaseLeavesEarlierArtifacts) {
    RunConfig cfg = small_config();
    cfg.adapter.b = 3;
    cfg.output_dir = dir_;
    const Dataset ds = prepare_dataset(cfg);
    BackendStack stack(cfg);
    FailingAdapterBackend failing(stack.backend(), cfg.adapter.b);
    EXPECT_THROW(static_cast<void>(run(cfg, ds, failing)), TransportError);
    EXPECT_TRUE(fs::exists(dir_ / "reranker_examples.jsonl"));
    EXPECT_TRUE(fs::exists(dir_ / "reranker_fit_examples.jsonl"));
    EXPECT_TRUE(fs::exists(dir_ / "contexts.jsonl"));
    EXPECT_NO_THROW(static_cast<void>(load_model(dir_ / "reranker.model", cfg.encoder)));
    EXPECT_FALSE(fs::exists(dir_ / "adapter_examples.jsonl"));
    EXPECT_FALSE(fs::exists(dir_ / "predictions.jsonl"));
}

TEST(Evaluate, RequiresGold) {
    const std::vector<Prediction> preds{{"u", "q", std::nullopt, "A"}};
    EXPECT_ANY_THROW(static_cast<void>(evaluate(task_spec(TaskId::synthetic), preds)));
}

}  // namespace
}  // namespace hydra
