#include <gtest/gtest.h>

#include <cmath>

#include "hydra/error.hpp"
#include "hydra/factorized_model.hpp"
#include "hydra/model_io.hpp"
#include "hydra/random.hpp"
#include "oracles.hpp"

namespace hydra {
namespace {

const TextEncoderConfig kSmall{16, 4, 2};

std::uint32_t bucket(const std::string& gram, std::size_t dim) {
    return static_cast<std::uint32_t>(fnv1a64(gram) % dim);
}

TEST(Featurize, HandComputedBigramHashes) {
    const TextEncoderConfig cfg{4096, 8, 2};
    const SparseFeatures f = featurize("red fox", cfg);
    std::map<std::uint32_t, double> want;
    for (const char* g : {"1\x1fred", "1\x1f" "fox", "2\x1fred\x1f" "fox"}) {
        want[bucket(g, cfg.hash_dim)] += 1.0;
    }
    double norm = 0.0;
    for (const auto& [i, c] : want) {
        norm += c * c;
    }
    ASSERT_EQ(f.index.size(), want.size());
    std::size_t k = 0;
    for (const auto& [i, c] : want) {
        EXPECT_EQ(f.index[k], i);
        EXPECT_DOUBLE_EQ(f.value[k], c / std::sqrt(norm));
        ++k;
    }
    EXPECT_NE(featurize("red fox", cfg).index, featurize("red cat", cfg).index);
}

TEST(Featurize, SentinelsAreLiteralTokens) {
    const TextEncoderConfig cfg{4096, 8, 1};
    const SparseFeatures f = featurize("[CLS] q [SEP]", cfg);
    std::set<std::uint32_t> want{bucket("1\x1f[CLS]", 4096), bucket("1\x1fq", 4096),
                                 bucket("1\x1f[SEP]", 4096)};
    EXPECT_EQ(std::set<std::uint32_t>(f.index.begin(), f.index.end()), want);
}

TEST(Encode, EmptyTextGivesTanhOfBias) {
    FactorizedModel m(kSmall, 1);
    m.base().c1 << 0.3, -0.2, 0.1, 0.0;
    const Vector s = m.encode("");
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        EXPECT_DOUBLE_EQ(s[i], std::tanh(m.base().c1[i]));
    }
}

TEST(Encode, DeterministicAndBounded) {
    FactorizedModel m({256, 8, 2}, 3);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const std::string text = testing::random_text(seed, 0, 10);
        const Vector s = m.encode(text);
        EXPECT_EQ(s, m.encode(text));
        EXPECT_LE(s.cwiseAbs().maxCoeff(), 1.0);
    }
}

TEST(HeadForward, ZeroHeadIsUniform) {
    const Vector p = head_forward(zero_head(3), Vector::Constant(3, 0.7));
    EXPECT_DOUBLE_EQ(p[0], 0.5);
    EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(HeadForward, ZeroLogitsAreUniform) {
    HeadParams h = zero_head(1);
    h.W1(0, 0) = 1.0;
    h.W2(0, 0) = 1.0;
    const Vector p = head_forward(h, Vector::Zero(1));
    EXPECT_DOUBLE_EQ(p[0], 0.5);
}

TEST(HeadForward, HandEvaluatedSoftmax) {
    HeadParams h = zero_head(1);
    h.W1(0, 0) = 1.0;
    h.W2(0, 0) = 1.0;
    h.W2(1, 0) = -1.0;
    const Vector p = head_forward(h, Vector::Ones(1));
    EXPECT_NEAR(p[0], 0.8210, 1e-4);
    EXPECT_NEAR(p[1], 0.1790, 1e-4);
    const double t = std::tanh(1.0);
    EXPECT_NEAR(p[0], std::exp(t) / (std::exp(t) + std::exp(-t)), 1e-15);
}

TEST(HeadForward, DimensionMismatchIsShapeError) {
    EXPECT_THROW(static_cast<void>(head_forward(zero_head(3), Vector::Zero(2))), ShapeError);
}

TEST(HeadForward, SoftmaxNormalizationAndArgmaxInvariance) {
    Rng rng(10);
    for (int t = 0; t < 200; ++t) {
        HeadParams h = make_head(5, rng.next());
        h.b2 << rng.uniform(-3, 3), rng.uniform(-3, 3);
        Vector s(5);
        for (int i = 0; i < 5; ++i) {
            s[i] = rng.uniform(-1, 1);
        }
        const Vector p = head_forward(h, s);
        EXPECT_NEAR(p.sum(), 1.0, 1e-9);
        EXPECT_GT(p.minCoeff(), 0.0);
        HeadParams shifted = h;
        shifted.b2.array() += rng.uniform(-50, 50);
        Eigen::Index a = 0, b = 0;
        p.maxCoeff(&a);
        head_forward(shifted, s).maxCoeff(&b);
        EXPECT_EQ(a, b);
    }
}

TEST(CeLoss, Cases) {
    Vector p(2);
    p << 0.0, 1.0;
    EXPECT_NEAR(ce_loss(p, 1), 0.0, 1e-11);
    p << 0.5, 0.5;
    EXPECT_NEAR(ce_loss(p, 1), std::log(2.0), 1e-15);
    EXPECT_NEAR(ce_loss(p, 0), std::log(2.0), 1e-15);
    p << 1.0, 0.0;
    EXPECT_NEAR(ce_loss(p, 1), -std::log(kProbEpsilon), 1e-6);
}

TEST(Model, HeadManagement) {
    FactorizedModel m(kSmall, 1);
    EXPECT_FALSE(m.has_head("u"));
    EXPECT_THROW(static_cast<void>(m.head("u")), RoutingError);
    EXPECT_THROW(static_cast<void>(m.predict("u", "x")), RoutingError);
    m.add_head("u");
    EXPECT_THROW(m.add_head("u"), ConflictError);
    EXPECT_TRUE(m.has_head("u"));
    m.remove_head("u");
    EXPECT_FALSE(m.has_head("u"));
    EXPECT_THROW(m.set_head("v", zero_head(3)), ShapeError);
}

TEST(Model, HeadInitDependsOnKeyAndSeed) {
    FactorizedModel a(kSmall, 1);
    FactorizedModel b(kSmall, 1);
    FactorizedModel c(kSmall, 2);
    EXPECT_EQ(serialize_head(a.add_head("u")), serialize_head(b.add_head("u")));
    EXPECT_NE(serialize_head(a.head("u")), serialize_head(a.add_head("v")));
    EXPECT_NE(serialize_head(c.add_head("u")), serialize_head(a.head("u")));
    const double bound = 1.0 / std::sqrt(4.0);
    EXPECT_LE(a.head("u").W1.cwiseAbs().maxCoeff(), bound);
    EXPECT_EQ(a.head("u").b1.squaredNorm(), 0.0);
}

TEST(Model, PredictEqualsHeadForwardOfEncode) {
    FactorizedModel m({64, 6, 2}, 5);
    m.add_head("u");
    const Vector p = m.predict("u", "some words here");
    EXPECT_EQ(p, head_forward(m.head("u"), m.encode("some words here")));
    EXPECT_EQ(p, m.predict("u", "some words here"));
    EXPECT_EQ(m.score("u", "some words here"), p[1]);
}

TEST(Gradients, MatchFiniteDifferences) {
    Rng rng(77);
    for (int t = 0; t < 30; ++t) {
        FactorizedModel m({16, 1 + rng.below(4), 1 + rng.below(2)}, rng.next());
        m.add_head("u");
        m.base().c1.setRandom();
        m.head("u").b1.setRandom();
        m.head("u").b2.setRandom();
        const auto check = testing::finite_difference_check(
            m, "u", testing::random_text(rng.next(), 1, 6), static_cast<int>(rng.below(2)));
        EXPECT_LE(check.max_rel_error, 1e-4) << "worst " << check.worst;
    }
}

TEST(Gradients, OptimumHasTinyGradient) {
    FactorizedModel m(kSmall, 1);
    HeadParams& h = m.add_head("u");
    h.b2 << -40.0, 40.0;
    const Gradients g = m.gradients("u", "words", 1);
    double norm = g.dB1.squaredNorm() + g.dc1.squaredNorm() + g.dhead.W1.squaredNorm() +
                  g.dhead.W2.squaredNorm() + g.dhead.b1.squaredNorm() + g.dhead.b2.squaredNorm();
    for (const auto& [row, v] : g.dE_rows) {
        norm += v.squaredNorm();
    }
    EXPECT_LT(std::sqrt(norm), 1e-6);
}

TEST(Gradients, OnlyTouchedEmbeddingRowsMaterialize) {
    FactorizedModel m({4096, 4, 2}, 1);
    m.add_head("u");
    const Gradients g = m.gradients("u", "one two", 1);
    const SparseFeatures f = featurize("one two", m.config());
    std::set<std::uint32_t> rows;
    for (const auto& [row, v] : g.dE_rows) {
        rows.insert(row);
    }
    EXPECT_EQ(rows, std::set<std::uint32_t>(f.index.begin(), f.index.end()));
}

TEST(TrainStep, TwoStepsDecreaseLossOnSeparableExample) {
    FactorizedModel m({64, 8, 2}, 2);
    m.add_head("u");
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    const double l0 = ce_loss(m.predict("u", "good"), 1);
    const double r0 = m.train_step("u", "good", 1, cfg);
    EXPECT_DOUBLE_EQ(r0, l0);
    const double l1 = ce_loss(m.predict("u", "good"), 1);
    m.train_step("u", "good", 1, cfg);
    const double l2 = ce_loss(m.predict("u", "good"), 1);
    EXPECT_LT(l1, l0);
    EXPECT_LT(l2, l1);
}

TEST(TrainStep, OtherHeadsUntouched) {
    FactorizedModel m({64, 8, 2}, 2);
    m.add_head("u1");
    m.add_head("u2");
    const std::string before = serialize_head(m.head("u2"));
    const std::string base_before = serialize_base(m.base());
    m.train_step("u1", "x y", 1, {});
    EXPECT_EQ(serialize_head(m.head("u2")), before);
    EXPECT_NE(serialize_base(m.base()), base_before);
}

TEST(TrainStep, ZeroLearningRateChangesNothing) {
    FactorizedModel m({64, 8, 2}, 2);
    m.add_head("u");
    const std::string before = serialize_model(m);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    const double loss = m.train_step("u", "x y", 0, cfg);
    EXPECT_DOUBLE_EQ(loss, ce_loss(m.predict("u", "x y"), 0));
    EXPECT_EQ(serialize_model(m), before);
}

TEST(TrainStep, MissingHeadIsRoutingError) {
    FactorizedModel m(kSmall, 1);
    EXPECT_THROW(m.train_step("nobody", "x", 1, {}), RoutingError);
}

TEST(TrainConfig, Validation) {
    EXPECT_NO_THROW(validate(TrainConfig{}));
    EXPECT_THROW(validate(TrainConfig{-1.0}), ConfigError);
    EXPECT_THROW(validate(TrainConfig{0.1, 0}), ConfigError);
    EXPECT_THROW(validate(TextEncoderConfig{4, 8, 1}), ConfigError);
}

TEST(TrainBatch, HeadOnlyAccumulatesItsOwnSamples) {
    FactorizedModel batched({64, 4, 2}, 3);
    batched.add_head("a");
    batched.add_head("b");
    FactorizedModel manual = batched;
    TrainConfig cfg;
    cfg.learning_rate = 0.5;
    const std::vector<RoutedExample> batch{{"a", "p q", 1}, {"b", "r s", 0}, {"a", "t", 0}};
    batched.train_batch(batch, cfg);

    // Head "b" gets the gradient of its single sample divided by the batch size.
    const Gradients gb = manual.gradients("b", "r s", 0);
    const Matrix expected = manual.head("b").W1 - cfg.learning_rate * gb.dhead.W1 / 3.0;
    EXPECT_LT((batched.head("b").W1 - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(TrainModel, EmptyExamplesLeaveModelUnchanged) {
    FactorizedModel m(kSmall, 1);
    const std::string before = serialize_model(m);
    EXPECT_TRUE(train_model(m, {}, {}, 0).size() <= 2);
    EXPECT_EQ(serialize_model(m), before);
}

TEST(TrainModel, SeparableSingleUserLossFalls) {
    FactorizedModel m({256, 8, 2}, 4);
    std::vector<RoutedExample> ex;
    for (int i = 0; i < 20; ++i) {
        ex.push_back({"u", "pos " + std::to_string(i), 1});
        ex.push_back({"u", "neg " + std::to_string(i), 0});
    }
    TrainConfig cfg{0.2, 10, 8};
    const auto losses = train_model(m, ex, cfg, 1);
    ASSERT_EQ(losses.size(), 10U);
    EXPECT_LT(losses.back(), losses.front());
}

TEST(TrainModel, TwoUsersGetHeadsOthersAbsent) {
    FactorizedModel m(kSmall, 1);
    const std::vector<RoutedExample> ex{{"u1", "a", 1}, {"u2", "b", 0}};
    static_cast<void>(train_model(m, ex, {0.1, 2, 2}, 0));
    EXPECT_EQ(m.heads().size(), 2U);
    FactorizedModel fresh(kSmall, 1);
    EXPECT_NE(serialize_head(m.head("u1")), serialize_head(fresh.add_head("u1")));
    EXPECT_NE(serialize_head(m.head("u2")), serialize_head(fresh.add_head("u2")));
}

TEST(TrainModel, DeterministicForSameInputs) {
    std::vector<RoutedExample> ex;
    for (int i = 0; i < 30; ++i) {
        ex.push_back({"u" + std::to_string(i % 3), testing::random_text(i, 1, 5), i % 2});
    }
    FactorizedModel a({128, 6, 2}, 9);
    FactorizedModel b({128, 6, 2}, 9);
    EXPECT_EQ(train_model(a, ex, {0.1, 3, 4}, 5), train_model(b, ex, {0.1, 3, 4}, 5));
    EXPECT_EQ(serialize_model(a), serialize_model(b));
}

TEST(FitNewHead, BaseFrozenAndConflictOnExisting) {
    FactorizedModel m({128, 6, 2}, 9);
    m.add_head("old");
    const std::string base = serialize_base(m.base());
    const std::string old = serialize_head(m.head("old"));
    std::vector<TextExample> ex{{"a b", 1}, {"c d", 0}};
    std::vector<double> losses;
    fit_new_head(m, "new", ex, {0.1, 3, 1}, &losses);
    EXPECT_EQ(serialize_base(m.base()), base);
    EXPECT_EQ(serialize_head(m.head("old")), old);
    EXPECT_EQ(losses.size(), 3U);
    EXPECT_THROW(fit_new_head(m, "new", ex, {}), ConflictError);
}

TEST(FitNewHead, NoExamplesKeepsInitialization) {
    FactorizedModel m({128, 6, 2}, 9);
    const HeadParams h = fit_new_head(m, "u", {}, {});
    FactorizedModel fresh({128, 6, 2}, 9);
    EXPECT_EQ(serialize_head(h), serialize_head(fresh.add_head("u")));
}

TEST(FitNewHead, SeparableExamplesLossFalls) {
    FactorizedModel m({256, 8, 2}, 4);
    std::vector<TextExample> ex;
    for (int i = 0; i < 16; ++i) {
        ex.push_back({"[CLS] q" + std::to_string(i) + " [SEP] A [SEP]", 1});
        ex.push_back({"[CLS] q" + std::to_string(i) + " [SEP] B [SEP]", 0});
    }
    std::vector<double> losses;
    fit_new_head(m, "u", ex, {0.3, 8, 8}, &losses);
    EXPECT_LT(losses.back(), losses.front());
}

TEST(Predict, ConflictingUsersDisagreeAfterTraining) {
    FactorizedModel m({256, 8, 2}, 4);
    std::vector<RoutedExample> ex;
    for (int i = 0; i < 10; ++i) {
        const std::string q = "[CLS] query" + std::to_string(i) + " [SEP] ";
        ex.push_back({"u1", q + "A [SEP]", 1});
        ex.push_back({"u1", q + "B [SEP]", 0});
        ex.push_back({"u2", q + "A [SEP]", 0});
        ex.push_back({"u2", q + "B [SEP]", 1});
    }
    static_cast<void>(train_model(m, ex, {0.3, 20, 8}, 2));
    const std::string x = "[CLS] query3 [SEP] A [SEP]";
    EXPECT_GT(m.score("u1", x), 0.5);
    EXPECT_LT(m.score("u2", x), 0.5);
}

}  // namespace
}  // namespace hydra
