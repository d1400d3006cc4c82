#include "hydra/http_backend.hpp"

#include <atomic>
#include <cstdlib>
#include <semaphore>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "hydra/concurrency.hpp"
#include "hydra/error.hpp"
#include "hydra/random.hpp"

namespace hydra {

struct HttpBackend::State {
    State(std::size_t in_flight, double rps)
        : slots(static_cast<std::ptrdiff_t>(in_flight)), limiter(rps, std::max<std::size_t>(in_flight, 1)) {}

    std::counting_semaphore<4096> slots;
    TokenBucket limiter;
    std::atomic<std::size_t> sent{0};
    std::atomic<std::uint64_t> jitter_counter{0};
};

namespace {

bool retryable(int status) { return status == 429 || status >= 500; }

class SlotGuard {
  public:
    explicit SlotGuard(std::counting_semaphore<4096>& sem) : sem_(sem) { sem_.acquire(); }
    ~SlotGuard() { sem_.release(); }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;

  private:
    std::counting_semaphore<4096>& sem_;
};

std::vector<std::string> parse_choices(const std::string& body) {
    const auto doc = nlohmann::json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("choices") || !doc["choices"].is_array()) {
        throw BackendError("malformed chat-completions response");
    }
    std::vector<std::string> out;
    for (const auto& choice : doc["choices"]) {
        const auto msg = choice.find("message");
        if (msg == choice.end() || !msg->contains("content") || !(*msg)["content"].is_string()) {
            throw BackendError("chat-completions choice without message content");
        }
        out.push_back((*msg)["content"].get<std::string>());
    }
    return out;
}

}  // namespace

HttpBackend::HttpBackend(HttpConfig config) : config_(std::move(config)) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
        throw ConfigError("environment variable " + config_.api_key_env + " is not set");
    }
    if (config_.max_attempts == 0 || config_.max_in_flight == 0) {
        throw ConfigError("http backend: max_attempts and max_in_flight must be positive");
    }
    if (config_.max_in_flight > 4096) {
        throw ConfigError("http backend: max_in_flight above 4096");
    }
    api_key_ = key;
    state_ = std::make_unique<State>(config_.max_in_flight, config_.requests_per_second);
}

HttpBackend::~HttpBackend() = default;

std::size_t HttpBackend::requests_sent() const noexcept { return state_->sent.load(); }

std::vector<std::string> HttpBackend::generate(const GenerationRequest& req) {
    validate(req);
    std::vector<std::string> out;
    while (out.size() < req.n_samples) {
        nlohmann::json body = {
            {"model", config_.model},
            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", req.prompt}}})},
            {"n", req.n_samples - out.size()},
            {"temperature", req.temperature},
            {"max_tokens", req.max_tokens},
            {"seed", req.seed},
        };
        const std::string payload = body.dump();

        std::string failure;
        bool done = false;
        auto delay = config_.initial_backoff;
        for (std::size_t attempt = 1; attempt <= config_.max_attempts && !done; ++attempt) {
            httplib::Result res{nullptr, httplib::Error::Unknown};
            {
                SlotGuard slot(state_->slots);
                state_->limiter.acquire();
                httplib::Client client(config_.base_url);
                client.set_connection_timeout(config_.timeout);
                client.set_read_timeout(config_.timeout);
                client.set_write_timeout(config_.timeout);
                client.set_bearer_token_auth(api_key_);
                state_->sent.fetch_add(1);
                res = client.Post(config_.path, payload, "application/json");
            }
            if (res && res->status >= 200 && res->status < 300) {
                auto choices = parse_choices(res->body);
                if (choices.empty()) {
                    throw BackendError("chat-completions response with no choices");
                }
                for (auto& c : choices) {
                    if (out.size() < req.n_samples) {
                        out.push_back(std::move(c));
                    }
                }
                done = true;
                break;
            }
            if (res && !retryable(res->status)) {
                throw ConfigError("HTTP " + std::to_string(res->status) + " from " +
                                  config_.base_url + config_.path + ": " + res->body.substr(0, 200));
            }
            failure = res ? "HTTP " + std::to_string(res->status)
                          : "network error: " + httplib::to_string(res.error());
            if (attempt == config_.max_attempts) {
                break;
            }
            auto wait = delay;
            if (res && res->has_header("Retry-After")) {
                const long seconds = std::strtol(res->get_header_value("Retry-After").c_str(), nullptr, 10);
                if (seconds > 0) {
                    wait = std::max(wait, std::chrono::milliseconds(seconds * 1000));
                }
            }
            const double jitter =
                0.5 + 0.5 * unit_interval(mix64(state_->jitter_counter.fetch_add(1) ^
                                                 static_cast<std::uint64_t>(
                                                     std::chrono::steady_clock::now()
                                                         .time_since_epoch()
                                                         .count())));
            wait = std::min(config_.max_backoff,
                            std::chrono::milliseconds(static_cast<long long>(
                                static_cast<double>(wait.count()) * jitter)));
            spdlog::warn("LLM request attempt {}/{} failed ({}); retrying in {} ms", attempt,
                         config_.max_attempts, failure, wait.count());
            std::this_thread::sleep_for(wait);
            delay = std::min(config_.max_backoff, delay * 2);
        }
        if (!done) {
            throw TransportError("LLM request failed after " + std::to_string(config_.max_attempts) +
                                 " attempts: " + failure);
        }
    }
    return out;
}

}  // namespace hydra
