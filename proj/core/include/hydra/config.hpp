#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hydra/adapter.hpp"
#include "hydra/datamodel.hpp"
#include "hydra/factorized_model.hpp"
#include "hydra/http_backend.hpp"
#include "hydra/llm_backend.hpp"
#include "hydra/reranker.hpp"

namespace hydra {

enum class Mode {
    zero_shot,
    icl_random,
    rag,
    pag,
    hydra_reranker_only,
    hydra_adapter_only,
    hydra_full,
};

[[nodiscard]] std::string_view to_string(Mode mode) noexcept;
[[nodiscard]] Mode parse_mode(std::string_view name);
[[nodiscard]] bool is_baseline(Mode mode) noexcept;
[[nodiscard]] bool uses_reranker(Mode mode) noexcept;
[[nodiscard]] bool uses_adapter(Mode mode) noexcept;

struct RunConfig {
    TaskId task = TaskId::synthetic;
    /// JSONL dataset; empty with the synthetic task means generate in memory.
    std::filesystem::path data_path;
    /// Directory for audit dumps, metrics and models; empty disables output.
    std::filesystem::path output_dir;
    /// Re-split the pooled users when either is non-zero.
    std::size_t n_train = 0;
    std::size_t n_test = 0;

    std::size_t synth_users = 20;
    std::size_t synth_history = 20;
    std::size_t synth_test = 8;
    double synth_noise = 0.25;

    BackendKind backend = BackendKind::simulator;
    HttpConfig http;
    double simulator_context_weight = 0.3;

    bool cache_enabled = true;
    std::filesystem::path cache_path;  // empty keeps the cache in memory
    bool cache_bypass_zero_temperature = false;

    RerankConfig rerank;
    AdapterConfig adapter;
    double labeling_temperature = 1.0;
    double rouge_threshold = 0.5;
    std::size_t max_tokens = 64;

    TextEncoderConfig encoder;
    TrainConfig reranker_train;
    TrainConfig adapter_train;

    Mode mode = Mode::hydra_full;
    bool no_personal_reranker = false;
    bool no_personal_adapter = false;

    std::uint64_t seed = 0;
    std::size_t max_in_flight = 4;
};

/// Throws ConfigError when a field is out of range or inconsistent.
void validate(const RunConfig& cfg);

/// Sets one field by key (see config_keys). Throws ConfigError for an
/// unknown key or a value that does not parse.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

/// Every key accepted by apply_setting, in documentation order.
[[nodiscard]] std::vector<std::string> config_keys();

/// Applies "key = value" lines on top of `base`. Blank lines and lines
/// starting with '#' are ignored.
[[nodiscard]] RunConfig parse_config_text(std::string_view text, RunConfig base = {});
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Canonical "key = value" rendering that parse_config_text reads back.
[[nodiscard]] std::string to_config_text(const RunConfig& cfg);

}  // namespace hydra
