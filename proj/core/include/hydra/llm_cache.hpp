#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "hydra/llm_backend.hpp"

namespace hydra {

/// Content-addressed key for one sample: a hash of (model, prompt,
/// temperature, seed, max_tokens) followed by ":" and the sample index.
[[nodiscard]] std::string cache_key(std::string_view model, const GenerationRequest& req,
                                    std::size_t sample_index);

/// Thread-safe response store with optional JSONL persistence.
///
/// With a path, existing entries are loaded at construction and every put is
/// appended to the file. Unreadable lines are skipped with a warning, so a
/// damaged entry behaves as a miss.
class LlmCache {
  public:
    LlmCache() = default;
    explicit LlmCache(std::filesystem::path persist_path);

    LlmCache(const LlmCache&) = delete;
    LlmCache& operator=(const LlmCache&) = delete;

    [[nodiscard]] std::optional<std::string> get(const std::string& key);
    void put(const std::string& key, const std::string& response);

    [[nodiscard]] std::size_t hits() const noexcept { return hits_.load(); }
    [[nodiscard]] std::size_t misses() const noexcept { return misses_.load(); }
    [[nodiscard]] std::size_t size() const;
    /// Number of persisted lines that could not be read.
    [[nodiscard]] std::size_t skipped_lines() const noexcept { return skipped_; }

  private:
    mutable std::mutex mutex_;
    std::unordered_map<std::string, std::string> entries_;
    std::optional<std::filesystem::path> path_;
    std::ofstream sink_;
    std::atomic<std::size_t> hits_{0};
    std::atomic<std::size_t> misses_{0};
    std::size_t skipped_ = 0;
};

struct CachePolicy {
    bool enabled = true;
    /// Send temperature-0 requests to an HTTP backend straight through.
    bool bypass_zero_temperature_http = false;
};

/// Decorator that serves samples from an LlmCache and forwards whole requests
/// to the wrapped backend when any sample is missing.
class CachingBackend final : public LlmBackend {
  public:
    CachingBackend(LlmBackend& inner, LlmCache& cache, CachePolicy policy = {});

    [[nodiscard]] BackendKind kind() const noexcept override { return inner_.kind(); }
    [[nodiscard]] std::string model_name() const override { return inner_.model_name(); }
    [[nodiscard]] std::vector<std::string> generate(const GenerationRequest& req) override;

    /// Requests forwarded to the wrapped backend.
    [[nodiscard]] std::size_t backend_calls() const noexcept { return calls_.load(); }

  private:
    LlmBackend& inner_;
    LlmCache& cache_;
    CachePolicy policy_;
    std::atomic<std::size_t> calls_{0};
};

}  // namespace hydra
