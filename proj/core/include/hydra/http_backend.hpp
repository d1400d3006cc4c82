#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <string>

#include "hydra/llm_backend.hpp"

namespace hydra {

struct HttpConfig {
    /// scheme://host[:port]; https needs the library built with OpenSSL.
    std::string base_url = "https://api.openai.com";
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-3.5-turbo";
    /// Environment variable holding the bearer token.
    std::string api_key_env = "HYDRA_API_KEY";
    std::size_t max_attempts = 5;
    std::chrono::milliseconds initial_backoff{500};
    std::chrono::milliseconds max_backoff{30000};
    std::chrono::seconds timeout{60};
    std::size_t max_in_flight = 4;
    double requests_per_second = 0.0;  // 0 disables rate limiting
};

/// OpenAI-compatible chat-completions client.
///
/// The API key is read once at construction; a missing or empty key throws
/// ConfigError before any connection is made. 429, 5xx and network failures
/// are retried with exponential backoff and jitter up to `max_attempts`, then
/// raise TransportError. Other 4xx responses raise ConfigError at once. When
/// the provider returns fewer choices than requested, further requests are
/// issued for the remainder.
class HttpBackend final : public LlmBackend {
  public:
    explicit HttpBackend(HttpConfig config);
    ~HttpBackend() override;

    HttpBackend(const HttpBackend&) = delete;
    HttpBackend& operator=(const HttpBackend&) = delete;

    [[nodiscard]] BackendKind kind() const noexcept override {
        return BackendKind::http_openai_compatible;
    }
    [[nodiscard]] std::string model_name() const override { return config_.model; }
    [[nodiscard]] std::vector<std::string> generate(const GenerationRequest& req) override;

    /// Number of HTTP requests sent, retries included.
    [[nodiscard]] std::size_t requests_sent() const noexcept;

  private:
    struct State;

    HttpConfig config_;
    std::string api_key_;
    std::unique_ptr<State> state_;
};

}  // namespace hydra
