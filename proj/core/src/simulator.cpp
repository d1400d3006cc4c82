#include "hydra/llm_backend.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hydra/error.hpp"
#include "hydra/prompts.hpp"
#include "hydra/random.hpp"
#include "hydra/text.hpp"

namespace hydra {
namespace {

struct Candidate {
    std::string text;
    double weight;
};

std::size_t pick(std::span<const Candidate> cands, double temperature, double u) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < cands.size(); ++i) {
        if (cands[i].weight > cands[best].weight) {
            best = i;
        }
    }
    if (temperature == 0.0) {
        return best;
    }
    // Tempered weights in log space so small temperatures cannot underflow.
    const double top = std::log(cands[best].weight);
    std::vector<double> mass(cands.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        if (cands[i].weight > 0.0) {
            mass[i] = std::exp((std::log(cands[i].weight) - top) / temperature);
        }
        total += mass[i];
    }
    double acc = 0.0;
    const double target = u * total;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        acc += mass[i];
        if (target < acc) {
            return i;
        }
    }
    return best;
}

std::string summary_line(const TaskSpec& task, const std::vector<ContextEntry>& context) {
    std::string typical;
    if (task.is_classification()) {
        std::size_t best_count = 0;
        for (const auto& label : task.label_set) {
            std::size_t count = 0;
            for (const auto& entry : context) {
                count += normalize_answer(entry.answer) == normalize_answer(label) ? 1 : 0;
            }
            if (count > best_count) {
                best_count = count;
                typical = label;
            }
        }
    } else if (!context.empty()) {
        typical = context.front().answer;
    }
    std::string out(kSimulatedSummaryPrefix);
    out += "the user's typical answer is \"" + typical + "\".";
    return out;
}

// Pulls the typical answer back out of a simulated summary heading the prompt.
std::optional<std::string> summary_answer(std::string_view prompt) {
    if (prompt.substr(0, kSimulatedSummaryPrefix.size()) != kSimulatedSummaryPrefix) {
        return std::nullopt;
    }
    std::string_view line = prompt.substr(0, prompt.find('\n'));
    const auto open = line.find(" is \"");
    const auto close = line.rfind("\".");
    if (open == std::string_view::npos || close == std::string_view::npos || close < open + 5) {
        return std::nullopt;
    }
    std::string answer(line.substr(open + 5, close - open - 5));
    if (answer.empty()) {
        return std::nullopt;
    }
    return answer;
}

std::vector<Candidate> classification_candidates(const TaskSpec& task,
                                                 const std::vector<ContextEntry>& context,
                                                 double w) {
    std::vector<Candidate> cands;
    const double base = (context.empty() ? 1.0 : 1.0 - w) / static_cast<double>(task.label_set.size());
    for (const auto& label : task.label_set) {
        std::size_t count = 0;
        for (const auto& entry : context) {
            count += normalize_answer(entry.answer) == normalize_answer(label) ? 1 : 0;
        }
        const double share = context.empty()
                                 ? 0.0
                                 : static_cast<double>(count) / static_cast<double>(context.size());
        cands.push_back({label, w * share + base});
    }
    return cands;
}

std::vector<Candidate> generation_candidates(const std::vector<ContextEntry>& context,
                                             std::string_view input, double w) {
    std::vector<Candidate> cands;
    const auto words = split_whitespace(input);
    std::vector<std::string> spans;
    for (std::size_t len : {6U, 8U, 10U}) {
        std::string span;
        for (std::size_t i = 0; i < std::min<std::size_t>(len, words.size()); ++i) {
            if (i > 0) {
                span.push_back(' ');
            }
            span += words[i];
        }
        if (!span.empty() && std::find(spans.begin(), spans.end(), span) == spans.end()) {
            spans.push_back(std::move(span));
        }
    }
    const double ctx_mass = context.empty() ? 0.0 : (spans.empty() ? 1.0 : w);
    for (const auto& entry : context) {
        cands.push_back({entry.answer, ctx_mass / static_cast<double>(context.size())});
    }
    for (auto& span : spans) {
        cands.push_back({std::move(span), (1.0 - ctx_mass) / static_cast<double>(spans.size())});
    }
    return cands;
}

std::string truncate_words(std::string text, std::size_t max_tokens) {
    const auto words = split_whitespace(text);
    if (words.size() <= max_tokens) {
        return text;
    }
    std::string out;
    for (std::size_t i = 0; i < max_tokens; ++i) {
        if (i > 0) {
            out.push_back(' ');
        }
        out += words[i];
    }
    return out;
}

}  // namespace

TemplateOracle::TemplateOracle(TaskSpec task, double context_weight)
    : task_(std::move(task)), context_weight_(context_weight) {
    if (!(context_weight_ >= 0.0 && context_weight_ <= 1.0)) {
        throw ConfigError("simulator context weight must lie in [0, 1]");
    }
    validate(task_);
}

std::string TemplateOracle::respond(std::string_view prompt, double temperature, double u) const {
    ParsedPrompt parsed = parse_prompt(task_, prompt);
    if (parsed.is_summary_request) {
        return summary_line(task_, parsed.context);
    }
    if (auto typical = summary_answer(prompt)) {
        parsed.context.push_back({"", std::move(*typical)});
    }
    const auto cands = task_.is_classification()
                           ? classification_candidates(task_, parsed.context, context_weight_)
                           : generation_candidates(parsed.context, parsed.input, context_weight_);
    if (cands.empty()) {
        return {};
    }
    return cands[pick(cands, temperature, u)].text;
}

EchoOracle::EchoOracle(TaskSpec task, std::map<std::string, std::string> gold_by_input)
    : task_(std::move(task)), gold_by_input_(std::move(gold_by_input)) {}

EchoOracle::EchoOracle(TaskSpec task, const Dataset& ds) : task_(std::move(task)) {
    for (const auto* users : {&ds.train_users, &ds.test_users}) {
        for (const auto& user : *users) {
            for (const auto& item : user.history) {
                gold_by_input_.insert_or_assign(item.query_text, item.answer_text);
            }
        }
    }
    // Main queries win over history entries with the same text.
    for (const auto* users : {&ds.train_users, &ds.test_users}) {
        for (const auto& user : *users) {
            if (user.gold) {
                gold_by_input_.insert_or_assign(user.query, *user.gold);
            }
        }
    }
}

std::string EchoOracle::respond(std::string_view prompt, double, double) const {
    const ParsedPrompt parsed = parse_prompt(task_, prompt);
    if (parsed.is_summary_request) {
        return {};
    }
    auto it = gold_by_input_.find(parsed.input);
    return it == gold_by_input_.end() ? std::string() : it->second;
}

double simulator_draw(std::string_view prompt, std::uint64_t seed,
                      std::size_t sample_index) noexcept {
    return unit_interval(
        hash_combine(hash_combine(fnv1a64(prompt), seed), static_cast<std::uint64_t>(sample_index)));
}

SimulatorBackend::SimulatorBackend(std::shared_ptr<const ResponseOracle> oracle, std::string model)
    : oracle_(std::move(oracle)), model_(std::move(model)) {
    if (!oracle_) {
        throw ConfigError("simulator backend needs a response oracle");
    }
}

std::vector<std::string> SimulatorBackend::generate(const GenerationRequest& req) {
    std::vector<std::string> out;
    out.reserve(req.n_samples);
    for (std::size_t j = 0; j < req.n_samples; ++j) {
        const double u = simulator_draw(req.prompt, req.seed, j);
        out.push_back(truncate_words(oracle_->respond(req.prompt, req.temperature, u), req.max_tokens));
    }
    return out;
}

}  // namespace hydra
