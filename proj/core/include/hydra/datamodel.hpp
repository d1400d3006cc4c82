#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace hydra {

enum class TaskId { lamp2n, lamp2m, lamp3, lamp4, lamp5, synthetic };
enum class TaskKind { categorical, ordinal, generation };
enum class MetricId { accuracy, f1, mae, rmse, rouge1, rougeL, bleu };

[[nodiscard]] std::string_view to_string(TaskId id) noexcept;
[[nodiscard]] std::string_view to_string(TaskKind kind) noexcept;
[[nodiscard]] std::string_view to_string(MetricId id) noexcept;

/// Parses "LaMP-2N", "LaMP-3", "Synthetic", ... Throws TemplateError for an
/// unknown task name.
[[nodiscard]] TaskId parse_task_id(std::string_view name);
[[nodiscard]] MetricId parse_metric_id(std::string_view name);

/// Static description of a personalization task.
///
/// `ppep_template` renders one history item and must contain `{query}` and
/// `{answer}`. `aip_template` assembles the final prompt from `{context}` (the
/// joined item renderings) and `{input}`.
struct TaskSpec {
    TaskId id = TaskId::synthetic;
    TaskKind kind = TaskKind::categorical;
    std::vector<std::string> label_set;
    std::string ppep_template;
    std::string aip_template;
    std::string pag_instruction;
    std::vector<MetricId> metric_set;

    [[nodiscard]] bool is_classification() const noexcept {
        return kind != TaskKind::generation;
    }
    bool operator==(const TaskSpec&) const = default;
};

/// Registry lookup; every task id has a spec.
[[nodiscard]] const TaskSpec& task_spec(TaskId id);

/// Throws ValidationError if the task definition breaks its invariants.
void validate(const TaskSpec& task);

struct HistoryItem {
    std::string item_id;
    std::string query_text;
    std::string answer_text;

    bool operator==(const HistoryItem&) const = default;
};

struct UserRecord {
    std::string user_id;
    std::string query;
    std::optional<std::string> gold;  // withheld at inference time
    std::vector<HistoryItem> history;

    bool operator==(const UserRecord&) const = default;
};

struct Dataset {
    TaskSpec task;
    std::vector<UserRecord> train_users;
    std::vector<UserRecord> test_users;

    [[nodiscard]] std::size_t size() const noexcept {
        return train_users.size() + test_users.size();
    }
    bool operator==(const Dataset&) const = default;
};

/// Reads one user per JSONL line:
/// `{"user_id", "input", "output", "profile": [{"id", "input", "output"}], "split"?}`.
/// An optional first line `schema-version: 1` is skipped. Users without a
/// "split" field (or with "train") land in train_users.
[[nodiscard]] Dataset load_dataset(const std::filesystem::path& path, const TaskSpec& task);

/// Same as load_dataset but reads from an in-memory buffer.
[[nodiscard]] Dataset parse_dataset(std::string_view jsonl, const TaskSpec& task);

/// Writes the dataset in the format load_dataset reads, with a version header
/// and a "split" field on every line.
[[nodiscard]] std::string serialize_dataset(const Dataset& ds);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

/// Pools all users, shuffles them with `seed`, and assigns the first `n_train`
/// to train and the next `n_test` to test. Throws SizeError when there are not
/// enough users.
[[nodiscard]] Dataset split_users(const Dataset& ds, std::size_t n_train, std::size_t n_test,
                                  std::uint64_t seed);

struct SyntheticOptions {
    std::size_t pool_size = 12;       // distinct shared query texts
    std::size_t words_per_text = 4;
    double noise_rate = 0.25;         // share of history items that go against the user's rule
    std::size_t n_test = 0;           // trailing users placed in test_users
};

/// Marker word carried by history items that go against their user's rule.
inline constexpr std::string_view kSyntheticNoiseMarker = "offhand";

/// Builds the synthetic conflict task. Each user has a hidden stance ("A" or
/// "B", split evenly); every clean query is labeled with the stance, and
/// query texts are drawn from a shared pool so the same text appears under
/// users with opposite labels. Users come in consecutive pairs (0,1), (2,3), ...
/// that share their main query text and hold opposite stances. The last
/// `options.n_test` users go to test_users, the rest to train_users; an even
/// n_test keeps test pairs intact. Throws SizeError if n_test > n_users.
[[nodiscard]] Dataset make_synthetic_task(std::size_t n_users, std::size_t history_per_user,
                                          std::uint64_t seed, const SyntheticOptions& options = {});

/// Query texts labeled differently by at least two users, considering main
/// queries (when gold is present) and history pairs across both splits.
[[nodiscard]] std::set<std::string> conflicting_queries(const Dataset& ds);

}  // namespace hydra
