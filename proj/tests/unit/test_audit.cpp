#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "hydra/audit.hpp"
#include "hydra/error.hpp"

namespace hydra {
namespace {

namespace fs = std::filesystem;

class AuditTest : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("hydra_audit_" + std::to_string(::getpid()));
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    fs::path dir_;
};

TEST_F(AuditTest, EveryRowTypeRoundTrips) {
    const std::vector<RerankerCandidate> cands{
        {"u", "q", "g", 3, {"i3", "hq", "ha"}, Provenance::sampled_history}};
    write_jsonl(dir_ / "c.jsonl", std::span(cands));
    EXPECT_EQ(read_reranker_candidates(dir_ / "c.jsonl"), cands);

    const std::vector<RerankerExample> rex{{"u", "[CLS] q [SEP] h [SEP]", 1, Provenance::main_query}};
    write_jsonl(dir_ / "r.jsonl", std::span(rex));
    EXPECT_EQ(read_reranker_examples(dir_ / "r.jsonl"), rex);

    const std::vector<AdapterExample> aex{{"u", "x \"quoted\"", 0}, {"v", "y", 1}};
    write_jsonl(dir_ / "a.jsonl", std::span(aex));
    const auto aback = read_adapter_examples(dir_ / "a.jsonl");
    ASSERT_EQ(aback.size(), 2U);
    EXPECT_EQ(aback[0].x, "x \"quoted\"");
    EXPECT_EQ(aback[1].y, 1);

    const std::vector<ContextRecord> ctx{{"u", "q", {4, 1}, {0.75, 0.125}}};
    write_jsonl(dir_ / "ctx.jsonl", std::span(ctx));
    EXPECT_EQ(read_contexts(dir_ / "ctx.jsonl"), ctx);

    const std::vector<GenerationRecord> gens{{"u", "q", {"A", "B"}, {0.1, 0.9}, 1}};
    write_jsonl(dir_ / "g.jsonl", std::span(gens));
    EXPECT_EQ(read_generations(dir_ / "g.jsonl"), gens);

    const std::vector<Prediction> preds{{"u", "q", "A", "B"}, {"v", "q2", std::nullopt, "A"}};
    write_jsonl(dir_ / "p.jsonl", std::span(preds));
    EXPECT_EQ(read_predictions(dir_ / "p.jsonl"), preds);
}

TEST_F(AuditTest, WritesAreByteStable) {
    const std::vector<ContextRecord> ctx{{"u", "q", {4, 1}, {0.1, 1.0 / 3.0}}};
    write_jsonl(dir_ / "a.jsonl", std::span(ctx));
    write_jsonl(dir_ / "b.jsonl", std::span(ctx));
    std::ifstream a(dir_ / "a.jsonl"), b(dir_ / "b.jsonl");
    EXPECT_EQ(std::string(std::istreambuf_iterator<char>(a), {}),
              std::string(std::istreambuf_iterator<char>(b), {}));
}

TEST_F(AuditTest, MalformedLineReportsLineNumber) {
    {
        std::ofstream out(dir_ / "bad.jsonl");
        out << R"({"user_id":"u","query":"q","gold":"A","prediction":"B"})" << "\n"
            << R"({"user_id":"u"})" << "\n";
    }
    try {
        static_cast<void>(read_predictions(dir_ / "bad.jsonl"));
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2U);
    }
}

}  // namespace
}  // namespace hydra
