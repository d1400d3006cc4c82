#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "hydra/datamodel.hpp"
#include "hydra/error.hpp"
#include "hydra/metrics.hpp"
#include "hydra/random.hpp"
#include "oracles.hpp"

namespace hydra {
namespace {

using Strings = std::vector<std::string>;

TEST(Accuracy, Cases) {
    EXPECT_EQ(accuracy(Strings{"a", "b"}, Strings{"a", "b"}), 1.0);
    EXPECT_EQ(accuracy(Strings{"a", "b"}, Strings{"c", "d"}), 0.0);
    EXPECT_EQ(accuracy(Strings{"a", "b", "c", "d"}, Strings{"a", "b", "c", "x"}), 0.75);
    EXPECT_EQ(accuracy(Strings{" A "}, Strings{"a"}), 1.0);
    EXPECT_ANY_THROW(static_cast<void>(accuracy(Strings{"a"}, Strings{"a", "b"})));
    EXPECT_ANY_THROW(static_cast<void>(accuracy(Strings{}, Strings{})));
}

TEST(MacroF1, Cases) {
    const Strings labels{"A", "B"};
    EXPECT_EQ(macro_f1(Strings{"A", "B"}, Strings{"A", "B"}, labels), 1.0);
    EXPECT_NEAR(macro_f1(Strings{"A", "A", "A", "A"}, Strings{"A", "A", "B", "B"}, labels), 1.0 / 3.0,
                1e-12);
    EXPECT_ANY_THROW(static_cast<void>(macro_f1(Strings{}, Strings{}, labels)));
}

TEST(MacroF1, UnknownLabelPolicy) {
    const Strings labels{"A", "B"};
    EXPECT_THROW(static_cast<void>(macro_f1(Strings{"Z"}, Strings{"A"}, labels)), ValidationError);
    EXPECT_EQ(macro_f1(Strings{"Z", "B"}, Strings{"A", "B"}, labels,
                       UnknownLabelPolicy::count_as_miss),
              0.5);
}

TEST(MaeRmse, Cases) {
    const auto zero = mae_rmse(Strings{"1", "5"}, Strings{"1", "5"});
    EXPECT_EQ(zero.mae, 0.0);
    EXPECT_EQ(zero.rmse, 0.0);
    const auto e = mae_rmse(Strings{"1", "5"}, Strings{"2", "3"});
    EXPECT_DOUBLE_EQ(e.mae, 1.5);
    EXPECT_NEAR(e.rmse, std::sqrt(2.5), 1e-12);
    EXPECT_EQ(mae_rmse(Strings{"great!"}, Strings{"3"}).mae, 0.0);
}

TEST(MaeRmse, MaeNeverExceedsRmse) {
    Rng rng(2);
    for (int t = 0; t < 200; ++t) {
        std::vector<int> p, g;
        for (std::size_t i = 0, n = 1 + rng.below(10); i < n; ++i) {
            p.push_back(1 + static_cast<int>(rng.below(5)));
            g.push_back(1 + static_cast<int>(rng.below(5)));
        }
        const auto e = mae_rmse(p, g);
        EXPECT_LE(e.mae, e.rmse + 1e-12);
    }
}

TEST(ParseRating, FallsBackToMidpoint) {
    EXPECT_EQ(parse_rating(" 4 "), 4);
    EXPECT_EQ(parse_rating("9"), 3);
    EXPECT_EQ(parse_rating("4.5"), 3);
    EXPECT_EQ(parse_rating(""), 3);
}

TEST(Rouge, HandDerivedValues) {
    EXPECT_EQ(rouge1("a b", "a b"), 1.0);
    EXPECT_EQ(rouge1("a b", "c d"), 0.0);
    EXPECT_DOUBLE_EQ(rouge1("the cat sat", "the cat"), 0.8);
    EXPECT_EQ(rougeL("x y z", "x y z"), 1.0);
    EXPECT_DOUBLE_EQ(rougeL("a b c d", "a c d"), 6.0 / 7.0);
    EXPECT_EQ(rougeL("", "a c d"), 0.0);
}

TEST(Bleu, Cases) {
    EXPECT_NEAR(bleu("the quick brown fox jumps", "the quick brown fox jumps"), 1.0, 1e-12);
    EXPECT_LT(bleu("alpha beta gamma", "delta epsilon zeta"), 0.05);
}

TEST(MetricProperties, RatiosBoundedAndSelfSimilarityIsOne) {
    for (std::uint64_t s = 0; s < 200; ++s) {
        const std::string a = testing::random_text(s, 1, 8);
        const std::string b = testing::random_text(s + 1000, 1, 8);
        for (double v : {rouge1(a, b), rougeL(a, b), bleu(a, b)}) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        EXPECT_DOUBLE_EQ(rouge1(a, a), 1.0);
        EXPECT_DOUBLE_EQ(rougeL(a, a), 1.0);
    }
}

TEST(MetricOracle, FixtureAgreement) {
    std::ifstream in(std::string(HYDRA_TEST_DATA_DIR) + "/metric_fixture.json");
    ASSERT_TRUE(in.good());
    const auto rows = nlohmann::json::parse(in);
    ASSERT_EQ(rows.size(), 50U);
    for (const auto& row : rows) {
        const auto cand = row.at("cand").get<std::string>();
        const auto ref = row.at("ref").get<std::string>();
        EXPECT_NEAR(rouge1(cand, ref), row.at("rouge1").get<double>(), 1e-6) << cand << " | " << ref;
        EXPECT_NEAR(rougeL(cand, ref), row.at("rougeL").get<double>(), 1e-6) << cand << " | " << ref;
        EXPECT_NEAR(bleu(cand, ref), row.at("bleu").get<double>(), 1e-6) << cand << " | " << ref;
    }
}

TEST(EvaluatePredictions, UsesTaskMetricSet) {
    const auto cls = evaluate_predictions(task_spec(TaskId::lamp2n), Strings{"sports"}, Strings{"sports"});
    EXPECT_EQ(cls.at("accuracy"), 1.0);
    EXPECT_EQ(cls.values.count("rouge-1"), 0U);
    const auto ord = evaluate_predictions(task_spec(TaskId::lamp3), Strings{"1", "5"}, Strings{"2", "3"});
    EXPECT_DOUBLE_EQ(ord.at("mae"), 1.5);
    const auto gen = evaluate_predictions(task_spec(TaskId::lamp4), Strings{"the cat sat"}, Strings{"the cat"});
    EXPECT_DOUBLE_EQ(gen.at("rouge-1"), 0.8);
    EXPECT_EQ(gen.n_examples, 1U);
}

TEST(MetricReport, TextAndJsonRendering) {
    MetricReport r;
    r.values = {{"accuracy", 0.5}, {"f1", 0.25}};
    r.n_examples = 4;
    EXPECT_NE(r.to_text().find("accuracy: 0.500000"), std::string::npos);
    const auto j = nlohmann::json::parse(r.to_json());
    EXPECT_EQ(j.at("metrics").at("f1").get<double>(), 0.25);
    EXPECT_EQ(j.at("n_examples").get<int>(), 4);
}

}  // namespace
}  // namespace hydra
