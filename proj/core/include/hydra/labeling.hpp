#pragma once

#include <string_view>

#include "hydra/datamodel.hpp"

namespace hydra {

/// 1 when the normalized strings are equal (see normalize_answer).
[[nodiscard]] int label_exact(std::string_view generated, std::string_view gold);

/// 1 when ROUGE-1 F1 of generated against gold reaches `threshold`.
/// Throws ConfigError for a threshold outside [0, 1].
[[nodiscard]] int label_rouge(std::string_view generated, std::string_view gold,
                              double threshold = 0.5);

/// Exact match for classification tasks, ROUGE-1 thresholding for generation.
[[nodiscard]] int label_for_task(const TaskSpec& task, std::string_view generated,
                                 std::string_view gold, double rouge_threshold = 0.5);

}  // namespace hydra
