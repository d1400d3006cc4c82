#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hydra/adapter.hpp"
#include "hydra/reranker.hpp"

namespace hydra {

// JSONL dumps of every intermediate artifact. Writers produce one compact JSON
// object per line with a fixed key order, so identical inputs give identical
// bytes. Readers throw ParseError with the 1-based line number.

/// The context chosen for one query: history ordinals, best first.
struct ContextRecord {
    std::string user_id;
    std::string query;
    std::vector<std::size_t> ordinals;
    std::vector<double> scores;  // reranker p[1], or BM25 scores without a reranker

    bool operator==(const ContextRecord&) const = default;
};

/// The b samples for one query, their adapter scores and the chosen index.
struct GenerationRecord {
    std::string user_id;
    std::string query;
    std::vector<std::string> generations;
    std::vector<double> scores;
    std::size_t chosen = 0;

    bool operator==(const GenerationRecord&) const = default;
};

struct Prediction {
    std::string user_id;
    std::string query;
    std::optional<std::string> gold;
    std::string prediction;

    bool operator==(const Prediction&) const = default;
};

void write_jsonl(const std::filesystem::path& path, std::span<const RerankerCandidate> rows);
void write_jsonl(const std::filesystem::path& path, std::span<const RerankerExample> rows);
void write_jsonl(const std::filesystem::path& path, std::span<const AdapterExample> rows);
void write_jsonl(const std::filesystem::path& path, std::span<const ContextRecord> rows);
void write_jsonl(const std::filesystem::path& path, std::span<const GenerationRecord> rows);
void write_jsonl(const std::filesystem::path& path, std::span<const Prediction> rows);

[[nodiscard]] std::vector<RerankerCandidate> read_reranker_candidates(const std::filesystem::path& path);
[[nodiscard]] std::vector<RerankerExample> read_reranker_examples(const std::filesystem::path& path);
[[nodiscard]] std::vector<AdapterExample> read_adapter_examples(const std::filesystem::path& path);
[[nodiscard]] std::vector<ContextRecord> read_contexts(const std::filesystem::path& path);
[[nodiscard]] std::vector<GenerationRecord> read_generations(const std::filesystem::path& path);
[[nodiscard]] std::vector<Prediction> read_predictions(const std::filesystem::path& path);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace hydra
