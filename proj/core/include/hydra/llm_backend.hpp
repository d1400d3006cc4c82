#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hydra/datamodel.hpp"

namespace hydra {

struct GenerationRequest {
    std::string prompt;
    std::size_t n_samples = 1;
    double temperature = 1.0;
    std::size_t max_tokens = 64;
    std::uint64_t seed = 0;  // honored by the simulator, forwarded to HTTP providers
};

/// Throws ConfigError unless n_samples >= 1, temperature >= 0 and
/// max_tokens >= 1.
void validate(const GenerationRequest& req);

enum class BackendKind { http_openai_compatible, simulator };

[[nodiscard]] std::string_view to_string(BackendKind kind) noexcept;
/// Accepts "simulator" and "http" (or "http_openai_compatible").
[[nodiscard]] BackendKind parse_backend_kind(std::string_view name);

/// A text-in, text-out language model.
class LlmBackend {
  public:
    virtual ~LlmBackend() = default;

    [[nodiscard]] virtual BackendKind kind() const noexcept = 0;
    /// Model identifier; part of the response cache key.
    [[nodiscard]] virtual std::string model_name() const = 0;
    /// Returns exactly req.n_samples responses. Implementations must be safe
    /// to call from several threads at once.
    [[nodiscard]] virtual std::vector<std::string> generate(const GenerationRequest& req) = 0;
};

/// Validates the request, calls the backend and checks the sample count.
[[nodiscard]] std::vector<std::string> generate(LlmBackend& backend, const GenerationRequest& req);

/// Runs independent requests with at most `max_in_flight` concurrent calls.
/// Results are positional. A failure is rethrown as the same error category
/// with the failing request index prefixed to the message.
[[nodiscard]] std::vector<std::vector<std::string>> generate_all(
    LlmBackend& backend, std::span<const GenerationRequest> requests, std::size_t max_in_flight);

/// Decides the simulator's response to a prompt. `u` is a uniform draw in
/// [0, 1) that is a pure function of (prompt, seed, sample index).
class ResponseOracle {
  public:
    virtual ~ResponseOracle() = default;
    [[nodiscard]] virtual std::string respond(std::string_view prompt, double temperature,
                                              double u) const = 0;
};

/// Default oracle. It reads the prompt back into context entries and the
/// input, then samples an answer.
///
/// Classification: label l gets weight w * (share of context answers equal
/// to l) + (1 - w) / |labels|. Generation: candidates are the context answers
/// (sharing weight w) and leading 6, 8 and 10 word spans of the input
/// (sharing 1 - w). Weights are raised to 1 / temperature; temperature 0
/// returns the highest-weight candidate, earliest on ties. A summarization
/// request returns a one-line summary that the oracle recognizes later.
class TemplateOracle final : public ResponseOracle {
  public:
    explicit TemplateOracle(TaskSpec task, double context_weight = 0.3);

    [[nodiscard]] std::string respond(std::string_view prompt, double temperature,
                                      double u) const override;

    [[nodiscard]] const TaskSpec& task() const noexcept { return task_; }

  private:
    TaskSpec task_;
    double context_weight_;
};

/// Prefix of the summaries TemplateOracle produces for profile prompts.
inline constexpr std::string_view kSimulatedSummaryPrefix = "Summary: ";

/// Answers with the gold output registered for the prompt's input, or an
/// empty string for an unknown input.
class EchoOracle final : public ResponseOracle {
  public:
    EchoOracle(TaskSpec task, std::map<std::string, std::string> gold_by_input);
    /// Registers every user's (query, gold) and every history (query, answer).
    EchoOracle(TaskSpec task, const Dataset& ds);

    [[nodiscard]] std::string respond(std::string_view prompt, double temperature,
                                      double u) const override;

  private:
    TaskSpec task_;
    std::map<std::string, std::string> gold_by_input_;
};

/// Always answers with the same text.
class FixedOracle final : public ResponseOracle {
  public:
    explicit FixedOracle(std::string response) : response_(std::move(response)) {}

    [[nodiscard]] std::string respond(std::string_view, double, double) const override {
        return response_;
    }

  private:
    std::string response_;
};

/// Offline backend. Each sample is oracle.respond(prompt, T, u_j) truncated to
/// max_tokens whitespace-separated words, where u_j hashes (prompt, seed, j).
/// Pure and thread-safe; never fails.
class SimulatorBackend final : public LlmBackend {
  public:
    explicit SimulatorBackend(std::shared_ptr<const ResponseOracle> oracle,
                              std::string model = "simulator");

    [[nodiscard]] BackendKind kind() const noexcept override { return BackendKind::simulator; }
    [[nodiscard]] std::string model_name() const override { return model_; }
    [[nodiscard]] std::vector<std::string> generate(const GenerationRequest& req) override;

  private:
    std::shared_ptr<const ResponseOracle> oracle_;
    std::string model_;
};

/// The uniform draw the simulator hands to its oracle for one sample.
[[nodiscard]] double simulator_draw(std::string_view prompt, std::uint64_t seed,
                                    std::size_t sample_index) noexcept;

}  // namespace hydra
