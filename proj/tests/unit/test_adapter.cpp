#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "hydra/adapter.hpp"
#include "hydra/error.hpp"
#include "hydra/llm_backend.hpp"
#include "hydra/random.hpp"
#include "hydra/reranker.hpp"

namespace hydra {
namespace {

UserRecord make_user(std::size_t n) {
    UserRecord u{"u", "main query", "A", {}};
    for (std::size_t i = 0; i < n; ++i) {
        u.history.push_back({std::to_string(i), "query " + std::to_string(i), i % 2 ? "A" : "B"});
    }
    return u;
}

TEST(AdapterConfig, Validation) {
    EXPECT_NO_THROW(validate(AdapterConfig{}));
    EXPECT_EQ(AdapterConfig{}.b, 8U);
    EXPECT_THROW(validate(AdapterConfig{0}), ConfigError);
}

TEST(AdapterCandidates, CountsAndOrder) {
    const auto c = gen_adapter_candidates(make_user(10));
    ASSERT_EQ(c.size(), 11U);
    EXPECT_EQ(c[0].query, "main query");
    EXPECT_FALSE(c[0].history_ordinal.has_value());
    for (std::size_t i = 1; i < c.size(); ++i) {
        EXPECT_EQ(c[i].query, "query " + std::to_string(i - 1));
        EXPECT_EQ(c[i].gold, (i - 1) % 2 ? "A" : "B");
        EXPECT_EQ(c[i].history_ordinal, i - 1);
    }
    EXPECT_EQ(gen_adapter_candidates(make_user(0)).size(), 1U);
}

TEST(AdapterCandidates, CountLawGrid) {
    for (std::size_t h = 0; h <= 20; ++h) {
        EXPECT_EQ(gen_adapter_candidates(make_user(h)).size(), h + 1);
        EXPECT_EQ(gen_adapter_candidates(make_user(h), false).size(), h);
    }
}

TEST(SampleGenerations, SizesAndDeterminism) {
    SimulatorBackend sim(std::make_shared<TemplateOracle>(task_spec(TaskId::synthetic)));
    const TaskSpec& task = task_spec(TaskId::synthetic);
    const auto user = make_user(4);
    EXPECT_EQ(sample_generations("q", user.history, {1}, sim, task).size(), 1U);
    const AdapterConfig cfg{8, 1.0, 64, 5};
    const auto a = sample_generations("q", user.history, cfg, sim, task);
    EXPECT_EQ(a.size(), 8U);
    EXPECT_EQ(a, sample_generations("q", user.history, cfg, sim, task));
    EXPECT_EQ(sample_generations("q", {}, cfg, sim, task).size(), 8U);
}

TEST(LabelAdapterExamples, Cases) {
    const TaskSpec& cls = task_spec(TaskId::synthetic);
    const std::vector<std::string> gens{"A", "B"};
    const auto ex = label_adapter_examples("u", "q", "A", gens, cls, 0.5);
    ASSERT_EQ(ex.size(), 2U);
    EXPECT_EQ(ex[0].y, 1);
    EXPECT_EQ(ex[1].y, 0);
    EXPECT_EQ(ex[0].x, pair_input("q", "A"));
    const std::vector<std::string> wrong{"B", "B"};
    for (const auto& e : label_adapter_examples("u", "q", "A", wrong, cls, 0.5)) {
        EXPECT_EQ(e.y, 0);
    }
    const std::vector<std::string> near{"the cat sat"};
    EXPECT_EQ(label_adapter_examples("u", "q", "the cat", near, task_spec(TaskId::lamp4), 0.5)[0].y, 1);
}

TEST(BestOfB, IndexRules) {
    EXPECT_EQ(best_of_b_index(std::vector<double>{0.4}), 0U);
    EXPECT_EQ(best_of_b_index(std::vector<double>{0.2, 0.9, 0.9}), 1U);
    EXPECT_THROW(static_cast<void>(best_of_b_index(std::vector<double>{})), PreconditionError);
}

TEST(BestOfB, MonotoneTransformInvariance) {
    Rng rng(3);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> s(1 + rng.below(8));
        for (auto& v : s) {
            v = static_cast<double>(rng.below(5)) / 5.0;
        }
        std::vector<double> transformed;
        for (double v : s) {
            transformed.push_back(std::exp(3.0 * v) - 7.0);
        }
        EXPECT_EQ(best_of_b_index(s), best_of_b_index(transformed));
    }
}

TEST(BestOfB, SelectsFromInputsUsingHead) {
    FactorizedModel m({128, 4, 2}, 1);
    m.add_head("u");
    const std::vector<std::string> gens{"alpha", "beta", "gamma"};
    const std::string chosen = best_of_b(m, "u", "q", gens);
    EXPECT_NE(std::find(gens.begin(), gens.end(), chosen), gens.end());
    std::vector<double> scores;
    for (const auto& g : gens) {
        scores.push_back(m.score("u", pair_input("q", g)));
    }
    EXPECT_EQ(chosen, gens[best_of_b_index(scores)]);
    EXPECT_EQ(best_of_b(m, "u", "q", std::vector<std::string>{"only"}), "only");
    EXPECT_THROW(static_cast<void>(best_of_b(m, "u", "q", std::vector<std::string>{})), PreconditionError);
    EXPECT_THROW(static_cast<void>(best_of_b(m, "v", "q", gens)), RoutingError);
}

TEST(BestOfB, OracleScorerFindsGoldWhenPresent) {
    Rng rng(11);
    const std::vector<std::string> labels{"A", "B", "C"};
    for (int t = 0; t < 200; ++t) {
        std::vector<std::string> gens(1 + rng.below(8));
        for (auto& g : gens) {
            g = labels[rng.below(3)];
        }
        const std::string gold = labels[rng.below(3)];
        std::vector<double> oracle;
        for (const auto& g : gens) {
            oracle.push_back(g == gold ? 1.0 : 0.0);
        }
        const bool present = std::find(gens.begin(), gens.end(), gold) != gens.end();
        EXPECT_EQ(gens[best_of_b_index(oracle)] == gold, present);
    }
}

}  // namespace
}  // namespace hydra
