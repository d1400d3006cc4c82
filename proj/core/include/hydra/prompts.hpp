#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hydra/datamodel.hpp"

namespace hydra {

struct PromptBundle {
    std::vector<std::string> ppep_strings;  // one rendering per history item
    std::string aip;                        // the final prompt

    bool operator==(const PromptBundle&) const = default;
};

/// Renders one history item with the task's per-entry template.
[[nodiscard]] std::string render_ppep(const TaskSpec& task, const HistoryItem& item);

/// Joins the item renderings with ", and ", then applies the task's
/// aggregation template around the input. With no items the prompt is the
/// input alone. Throws TemplateError for a malformed template.
[[nodiscard]] PromptBundle build_rag_prompt(const TaskSpec& task,
                                            std::span<const HistoryItem> items,
                                            std::string_view input);

/// Profile-summarization request: the task's instruction, a blank line, then
/// one rendered history item per line. Throws PreconditionError on an empty
/// history.
[[nodiscard]] std::string build_pag_summary_prompt(const TaskSpec& task,
                                                   std::span<const HistoryItem> history);

/// Prepends a profile summary to an assembled prompt.
[[nodiscard]] std::string compose_pag_prompt(std::string_view summary, std::string_view aip);

struct ContextEntry {
    std::string query;
    std::string answer;
};

struct ParsedPrompt {
    std::vector<ContextEntry> context;
    std::string input;
    bool is_summary_request = false;
};

/// Best-effort inverse of build_rag_prompt and build_pag_summary_prompt, used
/// by the offline simulator. A prompt that does not parse is treated as a
/// bare input with no context.
[[nodiscard]] ParsedPrompt parse_prompt(const TaskSpec& task, std::string_view prompt);

}  // namespace hydra
