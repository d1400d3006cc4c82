#include "hydra/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "hydra/error.hpp"

namespace hydra {
namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
    throw ConfigError("config key \"" + std::string(key) + "\": \"" + std::string(value) +
                      "\" is not " + expected);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value, const char* expected) {
    T out{};
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        bad_value(key, value, expected);
    }
    return out;
}

std::size_t as_size(std::string_view k, std::string_view v) {
    return parse_number<std::size_t>(k, v, "a non-negative integer");
}
std::uint64_t as_u64(std::string_view k, std::string_view v) {
    return parse_number<std::uint64_t>(k, v, "a non-negative integer");
}
double as_double(std::string_view k, std::string_view v) {
    return parse_number<double>(k, v, "a number");
}
bool as_bool(std::string_view k, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no" || v == "off") {
        return false;
    }
    bad_value(k, v, "a boolean");
}

std::string fmt_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}
std::string fmt_bool(bool v) { return v ? "true" : "false"; }

struct Field {
    const char* key;
    std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define HYDRA_SIZE_FIELD(name, member)                                                       \
    Field {                                                                                  \
        name, [](RunConfig& c, std::string_view k, std::string_view v) { c.member = as_size(k, v); }, \
            [](const RunConfig& c) { return std::to_string(c.member); }                      \
    }
#define HYDRA_DOUBLE_FIELD(name, member)                                                       \
    Field {                                                                                    \
        name, [](RunConfig& c, std::string_view k, std::string_view v) { c.member = as_double(k, v); }, \
            [](const RunConfig& c) { return fmt_double(c.member); }                            \
    }
#define HYDRA_BOOL_FIELD(name, member)                                                       \
    Field {                                                                                  \
        name, [](RunConfig& c, std::string_view k, std::string_view v) { c.member = as_bool(k, v); }, \
            [](const RunConfig& c) { return fmt_bool(c.member); }                            \
    }
#define HYDRA_PATH_FIELD(name, member)                                                     \
    Field {                                                                                \
        name, [](RunConfig& c, std::string_view, std::string_view v) { c.member = std::string(v); }, \
            [](const RunConfig& c) { return c.member.string(); }                           \
    }

Field clip_field(const char* name, TrainConfig RunConfig::*member) {
    return {name,
            [member](RunConfig& c, std::string_view k, std::string_view v) {
                if (v == "none" || v.empty()) {
                    (c.*member).clip.reset();
                } else {
                    (c.*member).clip = as_double(k, v);
                }
            },
            [member](const RunConfig& c) {
                const auto& clip = (c.*member).clip;
                return clip ? fmt_double(*clip) : std::string("none");
            }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        {"task", [](RunConfig& c, std::string_view, std::string_view v) { c.task = parse_task_id(v); },
         [](const RunConfig& c) { return std::string(to_string(c.task)); }},
        HYDRA_PATH_FIELD("data", data_path),
        HYDRA_PATH_FIELD("output_dir", output_dir),
        HYDRA_SIZE_FIELD("n_train", n_train),
        HYDRA_SIZE_FIELD("n_test", n_test),
        HYDRA_SIZE_FIELD("synth.users", synth_users),
        HYDRA_SIZE_FIELD("synth.history", synth_history),
        HYDRA_SIZE_FIELD("synth.test", synth_test),
        HYDRA_DOUBLE_FIELD("synth.noise", synth_noise),
        {"backend",
         [](RunConfig& c, std::string_view, std::string_view v) { c.backend = parse_backend_kind(v); },
         [](const RunConfig& c) { return std::string(to_string(c.backend)); }},
        {"http.base_url", [](RunConfig& c, std::string_view, std::string_view v) { c.http.base_url = v; },
         [](const RunConfig& c) { return c.http.base_url; }},
        {"http.path", [](RunConfig& c, std::string_view, std::string_view v) { c.http.path = v; },
         [](const RunConfig& c) { return c.http.path; }},
        {"http.model", [](RunConfig& c, std::string_view, std::string_view v) { c.http.model = v; },
         [](const RunConfig& c) { return c.http.model; }},
        {"http.api_key_env",
         [](RunConfig& c, std::string_view, std::string_view v) { c.http.api_key_env = v; },
         [](const RunConfig& c) { return c.http.api_key_env; }},
        HYDRA_SIZE_FIELD("http.max_attempts", http.max_attempts),
        HYDRA_DOUBLE_FIELD("http.rps", http.requests_per_second),
        {"http.timeout_s",
         [](RunConfig& c, std::string_view k, std::string_view v) {
             c.http.timeout = std::chrono::seconds(as_size(k, v));
         },
         [](const RunConfig& c) { return std::to_string(c.http.timeout.count()); }},
        HYDRA_DOUBLE_FIELD("simulator.context_weight", simulator_context_weight),
        HYDRA_BOOL_FIELD("cache.enabled", cache_enabled),
        HYDRA_PATH_FIELD("cache.path", cache_path),
        HYDRA_BOOL_FIELD("cache.bypass_zero_temperature", cache_bypass_zero_temperature),
        HYDRA_SIZE_FIELD("reranker.M", rerank.M),
        HYDRA_SIZE_FIELD("reranker.N", rerank.N),
        HYDRA_SIZE_FIELD("reranker.k", rerank.k),
        HYDRA_SIZE_FIELD("adapter.b", adapter.b),
        HYDRA_DOUBLE_FIELD("adapter.temperature", adapter.temperature),
        HYDRA_DOUBLE_FIELD("labeling.temperature", labeling_temperature),
        HYDRA_DOUBLE_FIELD("labeling.rouge_threshold", rouge_threshold),
        HYDRA_SIZE_FIELD("max_tokens", max_tokens),
        HYDRA_SIZE_FIELD("encoder.hash_dim", encoder.hash_dim),
        HYDRA_SIZE_FIELD("encoder.hidden_dim", encoder.hidden_dim),
        HYDRA_SIZE_FIELD("encoder.ngram_max", encoder.ngram_max),
        HYDRA_DOUBLE_FIELD("reranker.lr", reranker_train.learning_rate),
        HYDRA_SIZE_FIELD("reranker.epochs", reranker_train.epochs),
        HYDRA_SIZE_FIELD("reranker.batch", reranker_train.batch_size),
        clip_field("reranker.clip", &RunConfig::reranker_train),
        HYDRA_DOUBLE_FIELD("adapter.lr", adapter_train.learning_rate),
        HYDRA_SIZE_FIELD("adapter.epochs", adapter_train.epochs),
        HYDRA_SIZE_FIELD("adapter.batch", adapter_train.batch_size),
        clip_field("adapter.clip", &RunConfig::adapter_train),
        {"mode", [](RunConfig& c, std::string_view, std::string_view v) { c.mode = parse_mode(v); },
         [](const RunConfig& c) { return std::string(to_string(c.mode)); }},
        HYDRA_BOOL_FIELD("ablation.no_personal_reranker", no_personal_reranker),
        HYDRA_BOOL_FIELD("ablation.no_personal_adapter", no_personal_adapter),
        {"seed",
         [](RunConfig& c, std::string_view k, std::string_view v) { c.seed = as_u64(k, v); },
         [](const RunConfig& c) { return std::to_string(c.seed); }},
        HYDRA_SIZE_FIELD("max_in_flight", max_in_flight),
    };
    return table;
}

#undef HYDRA_SIZE_FIELD
#undef HYDRA_DOUBLE_FIELD
#undef HYDRA_BOOL_FIELD
#undef HYDRA_PATH_FIELD

constexpr std::pair<Mode, std::string_view> kModeNames[] = {
    {Mode::zero_shot, "zero_shot"},
    {Mode::icl_random, "icl_random"},
    {Mode::rag, "rag"},
    {Mode::pag, "pag"},
    {Mode::hydra_reranker_only, "hydra_reranker_only"},
    {Mode::hydra_adapter_only, "hydra_adapter_only"},
    {Mode::hydra_full, "hydra_full"},
};

}  // namespace

std::string_view to_string(Mode mode) noexcept {
    for (const auto& [m, name] : kModeNames) {
        if (m == mode) {
            return name;
        }
    }
    return "unknown";
}

Mode parse_mode(std::string_view name) {
    for (const auto& [m, n] : kModeNames) {
        if (n == name) {
            return m;
        }
    }
    throw ConfigError("unknown mode \"" + std::string(name) + "\"");
}

bool is_baseline(Mode mode) noexcept {
    return mode == Mode::zero_shot || mode == Mode::icl_random || mode == Mode::rag ||
           mode == Mode::pag;
}

bool uses_reranker(Mode mode) noexcept {
    return mode == Mode::hydra_reranker_only || mode == Mode::hydra_full;
}

bool uses_adapter(Mode mode) noexcept {
    return mode == Mode::hydra_adapter_only || mode == Mode::hydra_full;
}

void validate(const RunConfig& cfg) {
    validate(cfg.rerank);
    validate(cfg.adapter);
    validate(cfg.encoder);
    validate(cfg.reranker_train);
    validate(cfg.adapter_train);
    if (cfg.max_tokens == 0) {
        throw ConfigError("max_tokens must be at least 1");
    }
    if (cfg.max_in_flight == 0) {
        throw ConfigError("max_in_flight must be at least 1");
    }
    if (!(cfg.labeling_temperature >= 0.0)) {
        throw ConfigError("labeling.temperature must be non-negative");
    }
    if (!(cfg.rouge_threshold >= 0.0 && cfg.rouge_threshold <= 1.0)) {
        throw ConfigError("labeling.rouge_threshold must lie in [0, 1]");
    }
    if (!(cfg.simulator_context_weight >= 0.0 && cfg.simulator_context_weight <= 1.0)) {
        throw ConfigError("simulator.context_weight must lie in [0, 1]");
    }
    if (!(cfg.synth_noise >= 0.0 && cfg.synth_noise <= 1.0)) {
        throw ConfigError("synth.noise must lie in [0, 1]");
    }
    if (cfg.data_path.empty() && cfg.task != TaskId::synthetic) {
        throw ConfigError("data path is required for task " + std::string(to_string(cfg.task)));
    }
    if (cfg.data_path.empty() && (cfg.synth_users < 2 || cfg.synth_test > cfg.synth_users)) {
        throw ConfigError("synthetic task needs synth.users >= 2 and synth.test <= synth.users");
    }
    if ((cfg.no_personal_reranker || cfg.no_personal_adapter) && is_baseline(cfg.mode)) {
        throw ConfigError("ablation flags apply to hydra modes only");
    }
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
    key = trim(key);
    value = trim(value);
    for (const auto& f : fields()) {
        if (key == f.key) {
            f.set(cfg, key, value);
            return;
        }
    }
    throw ConfigError("unknown config key \"" + std::string(key) + "\"");
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& f : fields()) {
        out.emplace_back(f.key);
    }
    return out;
}

RunConfig parse_config_text(std::string_view text, RunConfig base) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) {
            eol = text.size();
        }
        ++line_no;
        const std::string_view line = trim(text.substr(pos, eol - pos));
        pos = eol + 1;
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        try {
            apply_setting(base, line.substr(0, eq), line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), std::move(base));
}

std::string to_config_text(const RunConfig& cfg) {
    std::string out;
    for (const auto& f : fields()) {
        out += f.key;
        out += " = ";
        out += f.get(cfg);
        out += '\n';
    }
    return out;
}

}  // namespace hydra
