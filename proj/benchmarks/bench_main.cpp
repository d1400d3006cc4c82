#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "hydra/factorized_model.hpp"
#include "hydra/metrics.hpp"
#include "hydra/random.hpp"
#include "hydra/retriever.hpp"

namespace {

std::string random_sentence(hydra::Rng& rng, std::size_t words) {
    static const std::vector<std::string> vocab = {
        "model", "user", "query", "answer", "history", "movie", "article", "title",
        "review", "score", "paper", "topic", "travel", "sports", "politics", "music",
        "the", "a", "of", "and", "to", "in", "for", "with"};
    std::string out;
    for (std::size_t i = 0; i < words; ++i) {
        out += (i ? " " : "") + vocab[rng.below(vocab.size())];
    }
    return out;
}

void BM_Bm25BuildAndRetrieve(benchmark::State& state) {
    hydra::Rng rng(1);
    std::vector<std::string> docs;
    for (int64_t i = 0; i < state.range(0); ++i) {
        docs.push_back(random_sentence(rng, 24));
    }
    const std::string query = random_sentence(rng, 6);
    for (auto _ : state) {
        const auto index = hydra::build_index_from_texts(docs);
        benchmark::DoNotOptimize(hydra::retrieve_top(index, query, 20));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Bm25BuildAndRetrieve)->Arg(20)->Arg(100)->Arg(500);

void BM_Bm25Retrieve(benchmark::State& state) {
    hydra::Rng rng(2);
    std::vector<std::string> docs;
    for (int64_t i = 0; i < state.range(0); ++i) {
        docs.push_back(random_sentence(rng, 24));
    }
    const auto index = hydra::build_index_from_texts(docs);
    const std::string query = random_sentence(rng, 6);
    for (auto _ : state) {
        benchmark::DoNotOptimize(hydra::retrieve_top(index, query, 20));
    }
}
BENCHMARK(BM_Bm25Retrieve)->Arg(100)->Arg(500);

hydra::FactorizedModel make_model(std::size_t d) {
    hydra::FactorizedModel m({4096, d, 2}, 7);
    m.add_head("u");
    return m;
}

void BM_Predict(benchmark::State& state) {
    const auto model = make_model(static_cast<std::size_t>(state.range(0)));
    hydra::Rng rng(3);
    const std::string text = random_sentence(rng, 40);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.score("u", text));
    }
}
BENCHMARK(BM_Predict)->Arg(32)->Arg(64)->Arg(128);

void BM_TrainStep(benchmark::State& state) {
    auto model = make_model(static_cast<std::size_t>(state.range(0)));
    hydra::Rng rng(4);
    const std::string text = random_sentence(rng, 40);
    hydra::TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.batch_size = 1;
    int y = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.train_step("u", text, y, cfg));
        y ^= 1;
    }
}
BENCHMARK(BM_TrainStep)->Arg(32)->Arg(64)->Arg(128);

void BM_TrainBatch(benchmark::State& state) {
    auto model = make_model(64);
    hydra::Rng rng(5);
    std::vector<hydra::RoutedExample> batch;
    for (int64_t i = 0; i < state.range(0); ++i) {
        batch.push_back({"u", random_sentence(rng, 30), static_cast<int>(i % 2)});
    }
    hydra::TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.batch_size = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.train_batch(batch, cfg));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainBatch)->Arg(16)->Arg(64);

void BM_Metrics(benchmark::State& state) {
    hydra::Rng rng(6);
    const std::string cand = random_sentence(rng, static_cast<std::size_t>(state.range(0)));
    const std::string ref = random_sentence(rng, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(hydra::rouge1(cand, ref));
        benchmark::DoNotOptimize(hydra::rougeL(cand, ref));
        benchmark::DoNotOptimize(hydra::bleu(cand, ref));
    }
}
BENCHMARK(BM_Metrics)->Arg(16)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
