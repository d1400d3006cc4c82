#include "hydra/llm_cache.hpp"

#include <bit>
#include <cstdio>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "hydra/error.hpp"
#include "hydra/random.hpp"

namespace hydra {

std::string cache_key(std::string_view model, const GenerationRequest& req,
                      std::size_t sample_index) {
    std::uint64_t h = fnv1a64(model);
    h = hash_combine(h, fnv1a64(req.prompt));
    h = hash_combine(h, std::bit_cast<std::uint64_t>(req.temperature));
    h = hash_combine(h, req.seed);
    h = hash_combine(h, static_cast<std::uint64_t>(req.max_tokens));
    char buf[48];
    std::snprintf(buf, sizeof buf, "%016llx:%zu", static_cast<unsigned long long>(h), sample_index);
    return buf;
}

LlmCache::LlmCache(std::filesystem::path persist_path) : path_(std::move(persist_path)) {
    if (std::filesystem::exists(*path_)) {
        std::ifstream in(*path_);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) {
                continue;
            }
            const auto doc = nlohmann::json::parse(line, nullptr, false);
            if (doc.is_discarded() || !doc.is_object() || !doc.contains("key") ||
                !doc.contains("response") || !doc["key"].is_string() ||
                !doc["response"].is_string()) {
                ++skipped_;
                spdlog::warn("cache {}: skipping unreadable entry on line {}", path_->string(), line_no);
                continue;
            }
            entries_.insert_or_assign(doc["key"].get<std::string>(), doc["response"].get<std::string>());
        }
    } else if (path_->has_parent_path()) {
        std::filesystem::create_directories(path_->parent_path());
    }
    sink_.open(*path_, std::ios::app);
    if (!sink_) {
        throw ConfigError("cannot open cache file " + path_->string());
    }
}

std::optional<std::string> LlmCache::get(const std::string& key) {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        misses_.fetch_add(1);
        return std::nullopt;
    }
    hits_.fetch_add(1);
    return it->second;
}

void LlmCache::put(const std::string& key, const std::string& response) {
    std::lock_guard lock(mutex_);
    auto [it, inserted] = entries_.try_emplace(key, response);
    if (!inserted) {
        if (it->second == response) {
            return;
        }
        it->second = response;
    }
    if (sink_.is_open()) {
        sink_ << nlohmann::json{{"key", key}, {"response", response}}.dump() << '\n';
        sink_.flush();
    }
}

std::size_t LlmCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

CachingBackend::CachingBackend(LlmBackend& inner, LlmCache& cache, CachePolicy policy)
    : inner_(inner), cache_(cache), policy_(policy) {}

std::vector<std::string> CachingBackend::generate(const GenerationRequest& req) {
    const bool bypass =
        !policy_.enabled ||
        (policy_.bypass_zero_temperature_http && req.temperature == 0.0 &&
         inner_.kind() == BackendKind::http_openai_compatible);
    if (bypass) {
        calls_.fetch_add(1);
        return hydra::generate(inner_, req);
    }
    const std::string model = inner_.model_name();
    std::vector<std::string> keys;
    std::vector<std::string> out;
    bool complete = true;
    for (std::size_t j = 0; j < req.n_samples; ++j) {
        keys.push_back(cache_key(model, req, j));
        auto hit = cache_.get(keys.back());
        if (!hit) {
            complete = false;
            break;
        }
        out.push_back(std::move(*hit));
    }
    if (complete) {
        return out;
    }
    calls_.fetch_add(1);
    out = hydra::generate(inner_, req);
    for (std::size_t j = 0; j < out.size(); ++j) {
        cache_.put(j < keys.size() ? keys[j] : cache_key(model, req, j), out[j]);
    }
    return out;
}

}  // namespace hydra
