#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "hydra/random.hpp"
#include "hydra/retriever.hpp"
#include "oracles.hpp"

namespace hydra {
namespace {

HistoryIndex index_of(std::vector<std::string> docs) { return build_index_from_texts(docs); }

TEST(Bm25Index, EmptyHistory) {
    const HistoryIndex idx = build_index({});
    EXPECT_EQ(idx.n_docs(), 0U);
    EXPECT_EQ(idx.avg_doc_len(), 0.0);
    EXPECT_TRUE(retrieve_top(idx, "anything", 5).empty());
}

TEST(Bm25Index, PostingsFollowDefinition) {
    const HistoryIndex idx = index_of({"a b", "b c"});
    const auto& p = idx.postings();
    ASSERT_EQ(p.size(), 3U);
    EXPECT_EQ(p.at("a"), (std::vector<Posting>{{0, 1}}));
    EXPECT_EQ(p.at("b"), (std::vector<Posting>{{0, 1}, {1, 1}}));
    EXPECT_EQ(p.at("c"), (std::vector<Posting>{{1, 1}}));
    EXPECT_DOUBLE_EQ(idx.avg_doc_len(), 2.0);
}

TEST(Bm25Index, LowercasingMergesTermFrequency) {
    const HistoryIndex idx = index_of({"A a"});
    EXPECT_EQ(idx.postings().at("a"), (std::vector<Posting>{{0, 2}}));
}

TEST(Bm25Index, DocumentIsQueryThenAnswer) {
    const HistoryItem item{"1", "some query", "its answer"};
    EXPECT_EQ(document_text(item), "some query its answer");
    const std::vector<HistoryItem> history{item};
    EXPECT_GT(bm25_score(build_index(history), "answer", 0), 0.0);
}

TEST(Bm25Score, HandComputedSingleTerm) {
    const HistoryIndex idx = index_of({"a b", "b c"});
    EXPECT_NEAR(bm25_score(idx, "a", 0), std::log(2.0), 1e-12);
}

TEST(Bm25Score, NoOverlapAndEmptyQueryScoreZero) {
    const HistoryIndex idx = index_of({"a b", "b c"});
    EXPECT_EQ(bm25_score(idx, "z", 0), 0.0);
    EXPECT_EQ(bm25_score(idx, "", 0), 0.0);
    EXPECT_EQ(bm25_score(idx, "", 1), 0.0);
}

TEST(Bm25Score, OrdinalOutOfRangeThrows) {
    const HistoryIndex idx = index_of({"a b"});
    EXPECT_THROW(static_cast<void>(bm25_score(idx, "a", 1)), std::out_of_range);
}

TEST(Bm25Score, RepeatedQueryTermsCountOnce) {
    const HistoryIndex idx = index_of({"a b", "b c"});
    EXPECT_EQ(bm25_score(idx, "a a a", 0), bm25_score(idx, "a", 0));
}

TEST(RetrieveTop, SaturationReturnsAllSorted) {
    const HistoryIndex idx = index_of({"x", "q q", "q", "y q"});
    const auto hits = retrieve_top(idx, "q", 10);
    ASSERT_EQ(hits.size(), 4U);
    for (std::size_t i = 1; i < hits.size(); ++i) {
        EXPECT_GE(hits[i - 1].score, hits[i].score);
    }
    EXPECT_EQ(hits.back().ordinal, 0U);
    EXPECT_EQ(hits.back().score, 0.0);
}

TEST(RetrieveTop, IdenticalTextsTieToLowerOrdinal) {
    const HistoryIndex idx = index_of({"other words", "same text", "same text"});
    const auto hits = retrieve_top(idx, "same", 1);
    ASSERT_EQ(hits.size(), 1U);
    EXPECT_EQ(hits[0].ordinal, 1U);
}

TEST(RetrieveTop, ExcludedOrdinalsNeverAppear) {
    const HistoryIndex idx = index_of({"q", "q", "q r", "r"});
    for (const auto& hit : retrieve_top(idx, "q r", 10, {0, 2})) {
        EXPECT_NE(hit.ordinal, 0U);
        EXPECT_NE(hit.ordinal, 2U);
    }
    EXPECT_EQ(retrieve_top(idx, "q r", 10, {0, 2}).size(), 2U);
}

TEST(RetrieveTop, MatchesBruteForceOnRandomCorpora) {
    const std::vector<std::string> vocab = {"t0", "t1", "t2", "t3", "t4", "t5"};
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n_docs = 1 + rng.below(8);
        std::vector<std::vector<std::string>> docs(n_docs);
        std::vector<std::string> texts;
        for (auto& d : docs) {
            const std::size_t len = rng.below(6);
            std::string text;
            for (std::size_t w = 0; w < len; ++w) {
                d.push_back(vocab[rng.below(vocab.size())]);
                text += (w ? " " : "") + d.back();
            }
            texts.push_back(text);
        }
        std::vector<std::string> query;
        std::string qtext;
        for (std::size_t w = 0, len = 1 + rng.below(3); w < len; ++w) {
            query.push_back(vocab[rng.below(vocab.size())]);
            qtext += (w ? " " : "") + query.back();
        }
        const std::size_t n = 1 + rng.below(n_docs + 1);
        const auto got = retrieve_top(build_index_from_texts(texts), qtext, n);
        const auto want = testing::brute_force_bm25(docs, query, n);
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].ordinal, want[i].ordinal) << "trial " << trial;
            EXPECT_NEAR(got[i].score, want[i].score, 1e-12);
        }
    }
}

TEST(Bm25Property, AddingQueryTermOccurrenceNeverLowersScore) {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::string> docs;
        for (int d = 0; d < 4; ++d) {
            docs.push_back(testing::random_text(rng.next(), 1, 6));
        }
        // Single-term queries: the longer document would otherwise lower the
        // contribution of every other query term.
        const std::string query = testing::random_text(rng.next(), 1, 1);
        const std::string& term = query;
        const double before = bm25_score(build_index_from_texts(docs), query, 0);
        docs[0] += " " + term;
        // df may grow by one, which can only lower IDF when the term was absent
        // before; restrict to documents that already contained it.
        if (before > 0.0) {
            EXPECT_GE(bm25_score(build_index_from_texts(docs), query, 0), before);
        }
    }
}

TEST(Bm25Property, Deterministic) {
    const std::vector<std::string> docs = {"a b c", "c d", "a a e"};
    EXPECT_EQ(retrieve_top(build_index_from_texts(docs), "a c", 3),
              retrieve_top(build_index_from_texts(docs), "a c", 3));
}

}  // namespace
}  // namespace hydra
