#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hydra/datamodel.hpp"

namespace hydra {

/// Metric name to value, plus the number of scored examples. Ratio metrics are
/// in [0, 1]; BLEU is reported on that scale and only scaled by 100 for display.
struct MetricReport {
    std::map<std::string, double> values;
    std::size_t n_examples = 0;

    [[nodiscard]] double at(std::string_view name) const;
    /// "name: value" lines in name order, values printed with 6 decimals.
    [[nodiscard]] std::string to_text() const;
    [[nodiscard]] std::string to_json() const;

    bool operator==(const MetricReport&) const = default;
};

/// Mean of normalized exact matches. Throws on length mismatch or empty input.
[[nodiscard]] double accuracy(std::span<const std::string> preds,
                              std::span<const std::string> golds);

enum class UnknownLabelPolicy {
    reject,         // throw ValidationError
    count_as_miss,  // a prediction outside the label set is simply wrong
};

/// Unweighted mean over the label set of per-class F1. A class absent from
/// both predictions and golds contributes 0. Gold labels must always belong
/// to the label set.
[[nodiscard]] double macro_f1(std::span<const std::string> preds,
                              std::span<const std::string> golds,
                              std::span<const std::string> label_set,
                              UnknownLabelPolicy policy = UnknownLabelPolicy::reject);

/// Integer rating parse used for MAE/RMSE. Anything that is not a whole
/// integer in [1, 5] after trimming maps to the midpoint 3.
[[nodiscard]] int parse_rating(std::string_view text) noexcept;

struct ErrorPair {
    double mae;
    double rmse;
};

/// Golds must parse as ratings; predictions fall back to parse_rating.
[[nodiscard]] ErrorPair mae_rmse(std::span<const std::string> preds,
                                 std::span<const std::string> golds);
[[nodiscard]] ErrorPair mae_rmse(std::span<const int> preds, std::span<const int> golds);

/// ROUGE-1 F1 over shared-tokenizer unigrams, clipped multiset overlap.
[[nodiscard]] double rouge1(std::string_view cand, std::string_view ref);

/// ROUGE-L F1 from the longest common subsequence.
[[nodiscard]] double rougeL(std::string_view cand, std::string_view ref);

/// Sentence BLEU, n-grams up to 4 with uniform weights. Zero unigram overlap
/// scores 0. For n >= 2 a zero match count becomes 1 / (candidate n-grams + 1).
/// Brevity penalty exp(1 - r / c) applies when the candidate is shorter.
[[nodiscard]] double bleu(std::string_view cand, std::string_view ref);

/// Computes every metric in the task's metric set.
[[nodiscard]] MetricReport evaluate_predictions(const TaskSpec& task,
                                                std::span<const std::string> preds,
                                                std::span<const std::string> golds);

}  // namespace hydra
