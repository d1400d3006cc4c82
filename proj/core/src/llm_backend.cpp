#include "hydra/llm_backend.hpp"

#include <exception>

#include "hydra/concurrency.hpp"
#include "hydra/error.hpp"

namespace hydra {

void validate(const GenerationRequest& req) {
    if (req.n_samples == 0) {
        throw ConfigError("generation request: n_samples must be at least 1");
    }
    if (!(req.temperature >= 0.0)) {
        throw ConfigError("generation request: temperature must be non-negative");
    }
    if (req.max_tokens == 0) {
        throw ConfigError("generation request: max_tokens must be at least 1");
    }
}

std::string_view to_string(BackendKind kind) noexcept {
    switch (kind) {
        case BackendKind::http_openai_compatible: return "http";
        case BackendKind::simulator: return "simulator";
    }
    return "unknown";
}

BackendKind parse_backend_kind(std::string_view name) {
    if (name == "simulator") {
        return BackendKind::simulator;
    }
    if (name == "http" || name == "http_openai_compatible") {
        return BackendKind::http_openai_compatible;
    }
    throw ConfigError("unknown backend \"" + std::string(name) + "\"");
}

std::vector<std::string> generate(LlmBackend& backend, const GenerationRequest& req) {
    validate(req);
    auto out = backend.generate(req);
    if (out.size() != req.n_samples) {
        throw BackendError("backend returned " + std::to_string(out.size()) + " samples, expected " +
                           std::to_string(req.n_samples));
    }
    return out;
}

std::vector<std::vector<std::string>> generate_all(LlmBackend& backend,
                                                   std::span<const GenerationRequest> requests,
                                                   std::size_t max_in_flight) {
    std::vector<std::vector<std::string>> out(requests.size());
    parallel_for(requests.size(), max_in_flight, [&](std::size_t i) {
        try {
            out[i] = generate(backend, requests[i]);
        } catch (const TransportError& e) {
            throw TransportError("request " + std::to_string(i) + ": " + e.what());
        } catch (const BackendError& e) {
            throw BackendError("request " + std::to_string(i) + ": " + e.what());
        }
    });
    return out;
}

}  // namespace hydra
