#include "hydra/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "hydra/concurrency.hpp"
#include "hydra/error.hpp"
#include "hydra/text.hpp"

namespace hydra {
namespace {

void check_lengths(std::size_t preds, std::size_t golds, const char* metric) {
    if (preds != golds) {
        throw ValidationError(std::string(metric) + ": " + std::to_string(preds) +
                              " predictions vs " + std::to_string(golds) + " golds");
    }
    if (preds == 0) {
        throw ValidationError(std::string(metric) + ": no examples");
    }
}

using NgramCounts = std::unordered_map<std::string, std::size_t>;

NgramCounts count_ngrams(const std::vector<std::string>& tokens, std::size_t n) {
    NgramCounts counts;
    if (tokens.size() < n) {
        return counts;
    }
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key = tokens[i];
        for (std::size_t k = 1; k < n; ++k) {
            key.push_back('\x1f');
            key += tokens[i + k];
        }
        ++counts[key];
    }
    return counts;
}

std::size_t clipped_overlap(const NgramCounts& cand, const NgramCounts& ref) {
    std::size_t overlap = 0;
    for (const auto& [gram, count] : cand) {
        if (auto it = ref.find(gram); it != ref.end()) {
            overlap += std::min(count, it->second);
        }
    }
    return overlap;
}

double f1_from(std::size_t overlap, std::size_t cand_len, std::size_t ref_len) {
    if (overlap == 0 || cand_len == 0 || ref_len == 0) {
        return 0.0;
    }
    const double precision = static_cast<double>(overlap) / static_cast<double>(cand_len);
    const double recall = static_cast<double>(overlap) / static_cast<double>(ref_len);
    return 2.0 * precision * recall / (precision + recall);
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> curr(b.size() + 1, 0);
    for (const auto& x : a) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            curr[j] = x == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], curr[j - 1]);
        }
        std::swap(prev, curr);
    }
    return prev[b.size()];
}

double mean_of(std::span<const double> values) {
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    return sum / static_cast<double>(values.size());
}

}  // namespace

double MetricReport::at(std::string_view name) const {
    auto it = values.find(std::string(name));
    if (it == values.end()) {
        throw std::out_of_range("metric \"" + std::string(name) + "\" not in report");
    }
    return it->second;
}

std::string MetricReport::to_text() const {
    std::string out;
    char buf[64];
    for (const auto& [name, value] : values) {
        std::snprintf(buf, sizeof buf, "%.6f", value);
        out += name + ": " + buf + "\n";
    }
    out += "n_examples: " + std::to_string(n_examples) + "\n";
    return out;
}

std::string MetricReport::to_json() const {
    nlohmann::json obj = nlohmann::json::object();
    for (const auto& [name, value] : values) {
        obj["metrics"][name] = value;
    }
    obj["n_examples"] = n_examples;
    return obj.dump(2);
}

double accuracy(std::span<const std::string> preds, std::span<const std::string> golds) {
    check_lengths(preds.size(), golds.size(), "accuracy");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        hits += normalize_answer(preds[i]) == normalize_answer(golds[i]) ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double macro_f1(std::span<const std::string> preds, std::span<const std::string> golds,
                std::span<const std::string> label_set, UnknownLabelPolicy policy) {
    check_lengths(preds.size(), golds.size(), "macro_f1");
    if (label_set.empty()) {
        throw ValidationError("macro_f1: empty label set");
    }
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t c = 0; c < label_set.size(); ++c) {
        index.emplace(normalize_answer(label_set[c]), c);
    }
    std::vector<std::size_t> tp(label_set.size(), 0);
    std::vector<std::size_t> fp(label_set.size(), 0);
    std::vector<std::size_t> fn(label_set.size(), 0);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        auto g = index.find(normalize_answer(golds[i]));
        if (g == index.end()) {
            throw ValidationError("macro_f1: gold label \"" + golds[i] + "\" not in label set");
        }
        auto p = index.find(normalize_answer(preds[i]));
        if (p == index.end()) {
            if (policy == UnknownLabelPolicy::reject) {
                throw ValidationError("macro_f1: predicted label \"" + preds[i] +
                                      "\" not in label set");
            }
            ++fn[g->second];
            continue;
        }
        if (p->second == g->second) {
            ++tp[g->second];
        } else {
            ++fp[p->second];
            ++fn[g->second];
        }
    }
    double total = 0.0;
    for (std::size_t c = 0; c < label_set.size(); ++c) {
        const std::size_t denom = 2 * tp[c] + fp[c] + fn[c];
        total += denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
    }
    return total / static_cast<double>(label_set.size());
}

int parse_rating(std::string_view text) noexcept {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return 3;
    }
    const auto last = text.find_last_not_of(" \t\r\n");
    text = text.substr(first, last - first + 1);
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || value < 1 || value > 5) {
        return 3;
    }
    return value;
}

ErrorPair mae_rmse(std::span<const int> preds, std::span<const int> golds) {
    check_lengths(preds.size(), golds.size(), "mae_rmse");
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double diff = static_cast<double>(preds[i] - golds[i]);
        abs_sum += std::abs(diff);
        sq_sum += diff * diff;
    }
    const auto n = static_cast<double>(preds.size());
    return {abs_sum / n, std::sqrt(sq_sum / n)};
}

ErrorPair mae_rmse(std::span<const std::string> preds, std::span<const std::string> golds) {
    check_lengths(preds.size(), golds.size(), "mae_rmse");
    std::vector<int> p;
    std::vector<int> g;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        p.push_back(parse_rating(preds[i]));
        int gold = 0;
        const std::string& gs = golds[i];
        auto [ptr, ec] = std::from_chars(gs.data(), gs.data() + gs.size(), gold);
        if (ec != std::errc() || ptr != gs.data() + gs.size()) {
            throw ValidationError("mae_rmse: gold \"" + gs + "\" is not an integer rating");
        }
        g.push_back(gold);
    }
    return mae_rmse(std::span<const int>(p), std::span<const int>(g));
}

double rouge1(std::string_view cand, std::string_view ref) {
    const Tokenizer tok;
    const auto c = tok.tokenize(cand);
    const auto r = tok.tokenize(ref);
    return f1_from(clipped_overlap(count_ngrams(c, 1), count_ngrams(r, 1)), c.size(), r.size());
}

double rougeL(std::string_view cand, std::string_view ref) {
    const Tokenizer tok;
    const auto c = tok.tokenize(cand);
    const auto r = tok.tokenize(ref);
    return f1_from(lcs_length(c, r), c.size(), r.size());
}

double bleu(std::string_view cand, std::string_view ref) {
    constexpr std::size_t kMaxOrder = 4;
    const Tokenizer tok;
    const auto c = tok.tokenize(cand);
    const auto r = tok.tokenize(ref);
    if (c.empty() || r.empty()) {
        return 0.0;
    }
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= kMaxOrder; ++n) {
        const std::size_t total = c.size() >= n ? c.size() - n + 1 : 0;
        const std::size_t matches = clipped_overlap(count_ngrams(c, n), count_ngrams(r, n));
        if (n == 1 && matches == 0) {
            return 0.0;
        }
        const double precision =
            matches == 0 ? 1.0 / static_cast<double>(total + 1)
                         : static_cast<double>(matches) / static_cast<double>(total);
        log_sum += std::log(precision);
    }
    const auto cl = static_cast<double>(c.size());
    const auto rl = static_cast<double>(r.size());
    const double brevity = cl < rl ? std::exp(1.0 - rl / cl) : 1.0;
    return brevity * std::exp(log_sum / static_cast<double>(kMaxOrder));
}

MetricReport evaluate_predictions(const TaskSpec& task, std::span<const std::string> preds,
                                  std::span<const std::string> golds) {
    check_lengths(preds.size(), golds.size(), "evaluate");
    MetricReport report;
    report.n_examples = preds.size();

    auto per_example_mean = [&](double (*metric)(std::string_view, std::string_view)) {
        std::vector<double> values(preds.size());
        parallel_for(preds.size(), std::thread::hardware_concurrency(),
                     [&](std::size_t i) { values[i] = metric(preds[i], golds[i]); });
        return mean_of(values);
    };

    std::vector<MetricId> wanted = task.metric_set;
    const bool need_errors = std::find(wanted.begin(), wanted.end(), MetricId::mae) != wanted.end() ||
                             std::find(wanted.begin(), wanted.end(), MetricId::rmse) != wanted.end();
    ErrorPair errors{};
    if (need_errors) {
        errors = mae_rmse(preds, golds);
    }
    for (MetricId id : wanted) {
        double value = 0.0;
        switch (id) {
            case MetricId::accuracy: value = accuracy(preds, golds); break;
            case MetricId::f1:
                value = macro_f1(preds, golds, task.label_set, UnknownLabelPolicy::count_as_miss);
                break;
            case MetricId::mae: value = errors.mae; break;
            case MetricId::rmse: value = errors.rmse; break;
            case MetricId::rouge1: value = per_example_mean(&rouge1); break;
            case MetricId::rougeL: value = per_example_mean(&rougeL); break;
            case MetricId::bleu: value = per_example_mean(&bleu); break;
        }
        report.values.emplace(std::string(to_string(id)), value);
    }
    return report;
}

}  // namespace hydra
