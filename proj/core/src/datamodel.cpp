#include "hydra/datamodel.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "hydra/error.hpp"
#include "hydra/random.hpp"

namespace hydra {
namespace {

using nlohmann::json;

constexpr std::string_view kSchemaHeader = "schema-version: 1";

TaskSpec make_spec(TaskId id, TaskKind kind, std::vector<std::string> labels, std::string ppep,
                   std::string aip, std::string pag, std::vector<MetricId> metrics) {
    return TaskSpec{id,
                    kind,
                    std::move(labels),
                    std::move(ppep),
                    std::move(aip),
                    std::move(pag),
                    std::move(metrics)};
}

std::vector<TaskSpec> build_registry() {
    const std::vector<MetricId> classification{MetricId::accuracy, MetricId::f1};
    const std::vector<MetricId> ordinal{MetricId::mae, MetricId::rmse};
    const std::vector<MetricId> generation{MetricId::rouge1, MetricId::rougeL, MetricId::bleu};
    const std::string aip = "{context}. {input}";

    std::vector<TaskSpec> specs;
    specs.push_back(make_spec(
        TaskId::lamp2n, TaskKind::categorical,
        {"women", "religion", "politics", "style & beauty", "entertainment", "culture & arts",
         "sports", "science & technology", "travel", "business", "crime", "education",
         "healthy living", "parents", "food & drink"},
        R"(the category for the article: "{query}" is "{answer}")", aip,
        "Look at the following past articles this journalist has written and determine the most "
        "popular category they write in. Answer in the following form: most popular category: "
        "<category>",
        classification));
    specs.push_back(make_spec(
        TaskId::lamp2m, TaskKind::categorical,
        {"sci-fi", "based on a book", "comedy", "action", "twist ending", "dystopia",
         "dark comedy", "classic", "psychology", "fantasy", "romance", "thought-provoking",
         "social commentary", "violence", "true story"},
        R"(the tag for the movie: "{query}" is "{answer}")", aip,
        "Which tag does this movie relate to among the following tags? Just answer with the tag "
        "name without further explanation",
        classification));
    specs.push_back(make_spec(
        TaskId::lamp3, TaskKind::ordinal, {"1", "2", "3", "4", "5"},
        R"({answer} is the score for "{query}")", aip,
        "Based on this user's past reviews, what are the most common scores they give for "
        "positive and negative reviews? Answer in the following form: most common positive "
        "score: <most common positive score>, most common negative score:  <most common "
        "negative score>",
        ordinal));
    specs.push_back(make_spec(
        TaskId::lamp4, TaskKind::generation, {}, R"("{answer}" is the title for "{query}")", aip,
        "Given this author's previous articles, try to describe a template for their headlines. "
        "I want to be able to accurately predict the headline given one of their articles. Be "
        "specific about their style and wording; don't tell me anything generic.",
        generation));
    specs.push_back(make_spec(
        TaskId::lamp5, TaskKind::generation, {}, R"("{answer}" is the title for "{query}")",
        "{context}. Following the given patterns {input}",
        "Given this author's previous publications, try to describe a template for their "
        "titles. I want to be able to accurately predict the title of one of the papers from the "
        "abstract. Only generate the template description, nothing else.",
        generation));
    specs.push_back(make_spec(
        TaskId::synthetic, TaskKind::categorical, {"A", "B"},
        R"(the label for "{query}" is "{answer}")", aip,
        "Look at the following past items this user has labeled and determine the label they "
        "use most often. Answer in the following form: most common label: <label>",
        classification));
    return specs;
}

std::string id_field(const json& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw ParseError(std::string("missing field \"") + key + "\"", line);
    }
    if (it->is_string()) {
        return it->get<std::string>();
    }
    if (it->is_number_integer()) {
        return std::to_string(it->get<long long>());
    }
    throw ParseError(std::string("field \"") + key + "\" must be a string or integer", line);
}

std::string string_field(const json& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) {
        throw ParseError(std::string("missing or non-string field \"") + key + "\"", line);
    }
    return it->get<std::string>();
}

UserRecord parse_user(const json& obj, std::size_t line, bool& is_test) {
    if (!obj.is_object()) {
        throw ParseError("expected a JSON object", line);
    }
    UserRecord user;
    user.user_id = id_field(obj, "user_id", line);
    user.query = string_field(obj, "input", line);
    if (auto it = obj.find("output"); it != obj.end() && !it->is_null()) {
        if (!it->is_string()) {
            throw ParseError("field \"output\" must be a string", line);
        }
        user.gold = it->get<std::string>();
    }
    auto profile = obj.find("profile");
    if (profile == obj.end() || !profile->is_array()) {
        throw ParseError("missing or non-array field \"profile\"", line);
    }
    std::unordered_set<std::string> seen_items;
    for (const auto& entry : *profile) {
        if (!entry.is_object()) {
            throw ParseError("profile entries must be objects", line);
        }
        HistoryItem item{id_field(entry, "id", line), string_field(entry, "input", line),
                         string_field(entry, "output", line)};
        if (item.query_text.empty()) {
            throw ValidationError("line " + std::to_string(line) + ": user \"" + user.user_id +
                                  "\" history item \"" + item.item_id + "\" has empty input");
        }
        if (!seen_items.insert(item.item_id).second) {
            throw ValidationError("line " + std::to_string(line) + ": duplicate item_id \"" +
                                  item.item_id + "\" for user \"" + user.user_id + "\"");
        }
        user.history.push_back(std::move(item));
    }
    if (user.history.empty()) {
        throw ValidationError("line " + std::to_string(line) + ": user \"" + user.user_id +
                              "\" has an empty history");
    }
    is_test = false;
    if (auto it = obj.find("split"); it != obj.end()) {
        const std::string split = it->is_string() ? it->get<std::string>() : std::string();
        if (split == "test") {
            is_test = true;
        } else if (split != "train") {
            throw ParseError("field \"split\" must be \"train\" or \"test\"", line);
        }
    }
    return user;
}

json user_to_json(const UserRecord& user, std::string_view split) {
    json profile = json::array();
    for (const auto& item : user.history) {
        profile.push_back({{"id", item.item_id}, {"input", item.query_text},
                           {"output", item.answer_text}});
    }
    json obj = {{"user_id", user.user_id}, {"input", user.query}, {"profile", profile},
                {"split", std::string(split)}};
    obj["output"] = user.gold ? json(*user.gold) : json(nullptr);
    return obj;
}

}  // namespace

std::string_view to_string(TaskId id) noexcept {
    switch (id) {
        case TaskId::lamp2n: return "LaMP-2N";
        case TaskId::lamp2m: return "LaMP-2M";
        case TaskId::lamp3: return "LaMP-3";
        case TaskId::lamp4: return "LaMP-4";
        case TaskId::lamp5: return "LaMP-5";
        case TaskId::synthetic: return "Synthetic";
    }
    return "?";
}

std::string_view to_string(TaskKind kind) noexcept {
    switch (kind) {
        case TaskKind::categorical: return "categorical";
        case TaskKind::ordinal: return "ordinal";
        case TaskKind::generation: return "generation";
    }
    return "?";
}

std::string_view to_string(MetricId id) noexcept {
    switch (id) {
        case MetricId::accuracy: return "accuracy";
        case MetricId::f1: return "f1";
        case MetricId::mae: return "mae";
        case MetricId::rmse: return "rmse";
        case MetricId::rouge1: return "rouge-1";
        case MetricId::rougeL: return "rouge-l";
        case MetricId::bleu: return "bleu";
    }
    return "?";
}

TaskId parse_task_id(std::string_view name) {
    for (TaskId id : {TaskId::lamp2n, TaskId::lamp2m, TaskId::lamp3, TaskId::lamp4,
                      TaskId::lamp5, TaskId::synthetic}) {
        const std::string_view canonical = to_string(id);
        if (std::equal(canonical.begin(), canonical.end(), name.begin(), name.end(),
                       [](char a, char b) { return std::tolower(static_cast<unsigned char>(a)) ==
                                                   std::tolower(static_cast<unsigned char>(b)); })) {
            return id;
        }
    }
    throw TemplateError("unknown task \"" + std::string(name) + "\"");
}

MetricId parse_metric_id(std::string_view name) {
    for (MetricId id : {MetricId::accuracy, MetricId::f1, MetricId::mae, MetricId::rmse,
                        MetricId::rouge1, MetricId::rougeL, MetricId::bleu}) {
        if (to_string(id) == name) {
            return id;
        }
    }
    throw ConfigError("unknown metric \"" + std::string(name) + "\"");
}

const TaskSpec& task_spec(TaskId id) {
    static const std::vector<TaskSpec> registry = build_registry();
    for (const auto& spec : registry) {
        if (spec.id == id) {
            return spec;
        }
    }
    throw TemplateError("no template registered for task");
}

void validate(const TaskSpec& task) {
    if (task.is_classification() && task.label_set.empty()) {
        throw ValidationError(std::string(to_string(task.id)) + ": classification task needs labels");
    }
    if (!task.is_classification() && !task.label_set.empty()) {
        throw ValidationError(std::string(to_string(task.id)) + ": generation task has labels");
    }
    if (task.ppep_template.find("{query}") == std::string::npos ||
        task.ppep_template.find("{answer}") == std::string::npos) {
        throw TemplateError(std::string(to_string(task.id)) + ": PPEP template lacks placeholders");
    }
    if (task.aip_template.find("{context}") == std::string::npos ||
        task.aip_template.find("{input}") == std::string::npos) {
        throw TemplateError(std::string(to_string(task.id)) + ": AIP template lacks placeholders");
    }
    if (task.metric_set.empty()) {
        throw ValidationError(std::string(to_string(task.id)) + ": empty metric set");
    }
}

Dataset parse_dataset(std::string_view jsonl, const TaskSpec& task) {
    validate(task);
    Dataset ds;
    ds.task = task;
    std::map<std::string, std::size_t> first_line;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < jsonl.size()) {
        std::size_t end = jsonl.find('\n', pos);
        if (end == std::string_view::npos) {
            end = jsonl.size();
        }
        std::string_view line = jsonl.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.find_first_not_of(" \t") == std::string_view::npos) {
            continue;
        }
        if (line_no == 1 && line == kSchemaHeader) {
            continue;
        }
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
        }
        bool is_test = false;
        UserRecord user = parse_user(obj, line_no, is_test);
        auto [it, inserted] = first_line.emplace(user.user_id, line_no);
        if (!inserted) {
            throw ValidationError("line " + std::to_string(line_no) + ": duplicate user_id \"" +
                                  user.user_id + "\" (first seen on line " +
                                  std::to_string(it->second) + ")");
        }
        (is_test ? ds.test_users : ds.train_users).push_back(std::move(user));
    }
    return ds;
}

Dataset load_dataset(const std::filesystem::path& path, const TaskSpec& task) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open dataset file " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_dataset(buffer.str(), task);
}

std::string serialize_dataset(const Dataset& ds) {
    std::string out(kSchemaHeader);
    out.push_back('\n');
    for (const auto& user : ds.train_users) {
        out += user_to_json(user, "train").dump();
        out.push_back('\n');
    }
    for (const auto& user : ds.test_users) {
        out += user_to_json(user, "test").dump();
        out.push_back('\n');
    }
    return out;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write dataset file " + path.string());
    }
    out << serialize_dataset(ds);
}

Dataset split_users(const Dataset& ds, std::size_t n_train, std::size_t n_test,
                    std::uint64_t seed) {
    std::vector<UserRecord> pool;
    pool.reserve(ds.size());
    pool.insert(pool.end(), ds.train_users.begin(), ds.train_users.end());
    pool.insert(pool.end(), ds.test_users.begin(), ds.test_users.end());
    if (n_train + n_test > pool.size()) {
        throw SizeError("requested " + std::to_string(n_train) + " train + " +
                        std::to_string(n_test) + " test users but only " +
                        std::to_string(pool.size()) + " are available");
    }
    Rng rng(seed);
    rng.shuffle(std::span<UserRecord>(pool));

    Dataset out;
    out.task = ds.task;
    auto first = pool.begin();
    out.train_users.assign(std::make_move_iterator(first),
                           std::make_move_iterator(first + static_cast<std::ptrdiff_t>(n_train)));
    first += static_cast<std::ptrdiff_t>(n_train);
    out.test_users.assign(std::make_move_iterator(first),
                          std::make_move_iterator(first + static_cast<std::ptrdiff_t>(n_test)));
    return out;
}

Dataset make_synthetic_task(std::size_t n_users, std::size_t history_per_user,
                            std::uint64_t seed, const SyntheticOptions& options) {
    if (n_users < 2) {
        throw PreconditionError("synthetic task needs at least two users");
    }
    static constexpr std::array<std::string_view, 24> kLexicon = {
        "amber",  "basalt", "cedar",  "delta",  "ember",  "fjord",  "garnet", "harbor",
        "indigo", "juniper", "kelp",  "lagoon", "meadow", "nectar", "orchid", "pumice",
        "quartz", "raven",  "saffron", "tundra", "umber", "violet", "willow", "zephyr"};
    const std::size_t words = std::clamp<std::size_t>(options.words_per_text, 1, kLexicon.size());
    const std::size_t pool_size = std::max<std::size_t>(options.pool_size, 1);

    Rng rng(derive_seed(seed, "synthetic"));
    std::vector<std::string> pool;
    std::set<std::string> distinct;
    while (pool.size() < pool_size) {
        std::vector<std::string_view> lexicon(kLexicon.begin(), kLexicon.end());
        rng.shuffle(std::span<std::string_view>(lexicon));
        std::string text;
        for (std::size_t w = 0; w < words; ++w) {
            if (w > 0) {
                text.push_back(' ');
            }
            text.append(lexicon[w]);
        }
        if (distinct.insert(text).second) {
            pool.push_back(std::move(text));
        }
    }

    const std::array<std::string, 2> labels{"A", "B"};
    std::vector<std::size_t> stance(n_users);
    for (std::size_t u = 0; u < n_users; u += 2) {
        const std::size_t first = rng.below(2);
        stance[u] = first;
        if (u + 1 < n_users) {
            stance[u + 1] = 1 - first;
        }
    }
    if (options.n_test > n_users) {
        throw SizeError("synthetic task: n_test exceeds n_users");
    }

    Dataset ds;
    ds.task = task_spec(TaskId::synthetic);
    std::string pair_query;
    for (std::size_t u = 0; u < n_users; ++u) {
        UserRecord user;
        char id[32];
        std::snprintf(id, sizeof id, "synth-u%03zu", u);
        user.user_id = id;
        if (u % 2 == 0) {
            pair_query = pool[rng.below(pool.size())];
        }
        user.query = pair_query;
        user.gold = labels[stance[u]];
        for (std::size_t h = 0; h < history_per_user; ++h) {
            HistoryItem item;
            item.item_id = user.user_id + "-h" + std::to_string(h);
            item.query_text = pool[rng.below(pool.size())];
            const bool noisy = rng.uniform01() < options.noise_rate;
            if (noisy) {
                item.query_text += ' ';
                item.query_text += kSyntheticNoiseMarker;
            }
            item.answer_text = labels[noisy ? 1 - stance[u] : stance[u]];
            user.history.push_back(std::move(item));
        }
        (u + options.n_test < n_users ? ds.train_users : ds.test_users).push_back(std::move(user));
    }
    return ds;
}

std::set<std::string> conflicting_queries(const Dataset& ds) {
    std::map<std::string, std::set<std::string>> labels_by_query;
    auto visit = [&](const std::vector<UserRecord>& users) {
        for (const auto& user : users) {
            if (user.gold) {
                labels_by_query[user.query].insert(*user.gold);
            }
            for (const auto& item : user.history) {
                labels_by_query[item.query_text].insert(item.answer_text);
            }
        }
    };
    visit(ds.train_users);
    visit(ds.test_users);
    std::set<std::string> out;
    for (const auto& [query, labels] : labels_by_query) {
        if (labels.size() > 1) {
            out.insert(query);
        }
    }
    return out;
}

}  // namespace hydra
