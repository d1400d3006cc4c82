#include "hydra/labeling.hpp"

#include "hydra/error.hpp"
#include "hydra/metrics.hpp"
#include "hydra/text.hpp"

namespace hydra {

int label_exact(std::string_view generated, std::string_view gold) {
    return normalize_answer(generated) == normalize_answer(gold) ? 1 : 0;
}

int label_rouge(std::string_view generated, std::string_view gold, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw ConfigError("ROUGE label threshold must lie in [0, 1]");
    }
    return rouge1(generated, gold) >= threshold ? 1 : 0;
}

int label_for_task(const TaskSpec& task, std::string_view generated, std::string_view gold,
                   double rouge_threshold) {
    return task.is_classification() ? label_exact(generated, gold)
                                    : label_rouge(generated, gold, rouge_threshold);
}

}  // namespace hydra
