#include "hydra/prompts.hpp"

#include <array>

#include "hydra/error.hpp"

namespace hydra {
namespace {

constexpr std::string_view kJoiner = ", and ";

struct EntryPattern {
    std::array<std::string_view, 3> literals;  // before, between, after the two slots
    bool query_first = true;
};

struct AggregatePattern {
    std::string_view prefix;
    std::string_view between;  // text between {context} and {input}
    std::string_view suffix;
};

EntryPattern compile_entry(const TaskSpec& task) {
    std::string_view t = task.ppep_template;
    const auto q = t.find("{query}");
    const auto a = t.find("{answer}");
    if (q == std::string_view::npos || a == std::string_view::npos) {
        throw TemplateError(std::string(to_string(task.id)) +
                            ": per-entry template needs {query} and {answer}");
    }
    EntryPattern p;
    p.query_first = q < a;
    const auto first = std::min(q, a);
    const auto first_len = p.query_first ? std::string_view("{query}").size()
                                         : std::string_view("{answer}").size();
    const auto second = std::max(q, a);
    const auto second_len = p.query_first ? std::string_view("{answer}").size()
                                          : std::string_view("{query}").size();
    p.literals[0] = t.substr(0, first);
    p.literals[1] = t.substr(first + first_len, second - first - first_len);
    p.literals[2] = t.substr(second + second_len);
    return p;
}

AggregatePattern compile_aggregate(const TaskSpec& task) {
    std::string_view t = task.aip_template;
    const auto c = t.find("{context}");
    const auto i = t.find("{input}");
    if (c == std::string_view::npos || i == std::string_view::npos || i < c) {
        throw TemplateError(std::string(to_string(task.id)) +
                            ": aggregation template needs {context} before {input}");
    }
    const auto clen = std::string_view("{context}").size();
    return {t.substr(0, c), t.substr(c + clen, i - c - clen),
            t.substr(i + std::string_view("{input}").size())};
}

std::string replace_all(std::string text, std::string_view key, std::string_view value) {
    for (auto pos = text.find(key); pos != std::string::npos;
         pos = text.find(key, pos + value.size())) {
        text.replace(pos, key.size(), value);
    }
    return text;
}

struct EntryMatch {
    ContextEntry entry;
    std::size_t end;  // position just past the entry, before its terminator
};

// Matches one rendered entry at `pos`. The second slot extends to the earliest
// point where the closing literal is followed by one of `terminators` (or the
// end of `text` when `allow_end`).
std::optional<EntryMatch> match_entry(std::string_view text, std::size_t pos,
                                      const EntryPattern& p,
                                      std::span<const std::string_view> terminators,
                                      bool allow_end) {
    if (text.substr(pos, p.literals[0].size()) != p.literals[0]) {
        return std::nullopt;
    }
    std::size_t cursor = pos + p.literals[0].size();
    const auto mid = text.find(p.literals[1], cursor);
    if (mid == std::string_view::npos) {
        return std::nullopt;
    }
    std::string first(text.substr(cursor, mid - cursor));
    cursor = mid + p.literals[1].size();

    std::size_t best = std::string_view::npos;
    for (std::string_view term : terminators) {
        std::string needle(p.literals[2]);
        needle += term;
        const auto hit = text.find(needle, cursor);
        if (hit != std::string_view::npos && hit < best) {
            best = hit;
        }
    }
    if (best == std::string_view::npos && allow_end) {
        const auto tail = text.size() >= p.literals[2].size() ? text.size() - p.literals[2].size()
                                                              : std::string_view::npos;
        if (tail != std::string_view::npos && tail >= cursor &&
            text.substr(tail) == p.literals[2]) {
            best = tail;
        }
    }
    if (best == std::string_view::npos) {
        return std::nullopt;
    }
    std::string second(text.substr(cursor, best - cursor));
    EntryMatch m;
    m.entry = p.query_first ? ContextEntry{std::move(first), std::move(second)}
                            : ContextEntry{std::move(second), std::move(first)};
    m.end = best + p.literals[2].size();
    return m;
}

std::optional<ParsedPrompt> parse_rag_at(std::string_view text, const EntryPattern& entry,
                                         const AggregatePattern& agg) {
    if (text.substr(0, agg.prefix.size()) != agg.prefix) {
        return std::nullopt;
    }
    const std::array<std::string_view, 2> terminators{kJoiner, agg.between};
    ParsedPrompt parsed;
    std::size_t pos = agg.prefix.size();
    for (;;) {
        auto m = match_entry(text, pos, entry, terminators, false);
        if (!m) {
            return std::nullopt;
        }
        // Entries never span lines; this keeps a preceding summary paragraph out.
        if (m->entry.query.find('\n') != std::string::npos ||
            m->entry.answer.find('\n') != std::string::npos) {
            return std::nullopt;
        }
        parsed.context.push_back(std::move(m->entry));
        pos = m->end;
        if (text.substr(pos, kJoiner.size()) == kJoiner) {
            pos += kJoiner.size();
            continue;
        }
        pos += agg.between.size();
        break;
    }
    std::string_view input = text.substr(pos);
    if (input.size() >= agg.suffix.size() &&
        input.substr(input.size() - agg.suffix.size()) == agg.suffix) {
        input.remove_suffix(agg.suffix.size());
    }
    parsed.input = std::string(input);
    return parsed;
}

}  // namespace

std::string render_ppep(const TaskSpec& task, const HistoryItem& item) {
    compile_entry(task);
    return replace_all(replace_all(task.ppep_template, "{query}", item.query_text), "{answer}",
                       item.answer_text);
}

PromptBundle build_rag_prompt(const TaskSpec& task, std::span<const HistoryItem> items,
                              std::string_view input) {
    compile_entry(task);
    const AggregatePattern agg = compile_aggregate(task);
    PromptBundle bundle;
    if (items.empty()) {
        bundle.aip = std::string(input);
        return bundle;
    }
    std::string context;
    for (const auto& item : items) {
        bundle.ppep_strings.push_back(render_ppep(task, item));
        if (!context.empty()) {
            context += kJoiner;
        }
        context += bundle.ppep_strings.back();
    }
    bundle.aip.reserve(context.size() + input.size() + 64);
    bundle.aip.append(agg.prefix).append(context).append(agg.between).append(input).append(agg.suffix);
    return bundle;
}

std::string build_pag_summary_prompt(const TaskSpec& task, std::span<const HistoryItem> history) {
    if (history.empty()) {
        throw PreconditionError("profile summary needs a non-empty history");
    }
    if (task.pag_instruction.empty()) {
        throw TemplateError(std::string(to_string(task.id)) + ": no summarization instruction");
    }
    std::string prompt = task.pag_instruction;
    prompt += "\n";
    for (const auto& item : history) {
        prompt += "\n";
        prompt += render_ppep(task, item);
    }
    return prompt;
}

std::string compose_pag_prompt(std::string_view summary, std::string_view aip) {
    std::string out(summary);
    out += "\n\n";
    out += aip;
    return out;
}

ParsedPrompt parse_prompt(const TaskSpec& task, std::string_view prompt) {
    const EntryPattern entry = compile_entry(task);
    const AggregatePattern agg = compile_aggregate(task);

    if (!task.pag_instruction.empty() && prompt.substr(0, task.pag_instruction.size()) ==
                                             std::string_view(task.pag_instruction)) {
        ParsedPrompt parsed;
        parsed.is_summary_request = true;
        std::size_t pos = task.pag_instruction.size();
        while (pos < prompt.size()) {
            auto eol = prompt.find('\n', pos);
            if (eol == std::string_view::npos) {
                eol = prompt.size();
            }
            std::string_view line = prompt.substr(pos, eol - pos);
            if (!line.empty()) {
                if (auto m = match_entry(line, 0, entry, {}, true); m && m->end == line.size()) {
                    parsed.context.push_back(std::move(m->entry));
                }
            }
            pos = eol + 1;
        }
        return parsed;
    }

    // The assembled prompt may follow a profile summary; try each line start.
    for (std::size_t start = 0; start < prompt.size();) {
        if (auto parsed = parse_rag_at(prompt.substr(start), entry, agg)) {
            return *parsed;
        }
        const auto eol = prompt.find('\n', start);
        if (eol == std::string_view::npos) {
            break;
        }
        start = eol + 1;
    }
    ParsedPrompt bare;
    const auto last_break = prompt.rfind("\n\n");
    bare.input = std::string(last_break == std::string_view::npos ? prompt
                                                                  : prompt.substr(last_break + 2));
    return bare;
}

}  // namespace hydra
