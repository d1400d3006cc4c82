#include "hydra/audit.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "hydra/error.hpp"

namespace hydra {
namespace {

using nlohmann::ordered_json;

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    return out;
}

template <typename T, typename Fn>
void write_rows(const std::filesystem::path& path, std::span<const T> rows, Fn to_json) {
    auto out = open_out(path);
    for (const auto& row : rows) {
        out << to_json(row).dump() << '\n';
    }
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
}

template <typename Fn>
auto read_rows(const std::filesystem::path& path, Fn from_json) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::vector<decltype(from_json(std::declval<const ordered_json&>()))> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        try {
            out.push_back(from_json(ordered_json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what(), line_no);
        } catch (const DataError& e) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what(), line_no);
        }
    }
    return out;
}

ordered_json item_json(const HistoryItem& item) {
    return {{"id", item.item_id}, {"input", item.query_text}, {"output", item.answer_text}};
}

HistoryItem item_from(const ordered_json& j) {
    return {j.at("id").get<std::string>(), j.at("input").get<std::string>(),
            j.at("output").get<std::string>()};
}

}  // namespace

void write_jsonl(const std::filesystem::path& path, std::span<const RerankerCandidate> rows) {
    write_rows(path, rows, [](const RerankerCandidate& c) {
        return ordered_json{{"user_id", c.user_id},     {"provenance", to_string(c.provenance)},
                            {"query", c.query},         {"gold", c.gold},
                            {"item_ordinal", c.item_ordinal}, {"item", item_json(c.item)}};
    });
}

void write_jsonl(const std::filesystem::path& path, std::span<const RerankerExample> rows) {
    write_rows(path, rows, [](const RerankerExample& e) {
        return ordered_json{{"user_id", e.user_id},
                            {"provenance", to_string(e.provenance)},
                            {"x", e.x},
                            {"y", e.y}};
    });
}

void write_jsonl(const std::filesystem::path& path, std::span<const AdapterExample> rows) {
    write_rows(path, rows, [](const AdapterExample& e) {
        return ordered_json{{"user_id", e.user_id}, {"x", e.x}, {"y", e.y}};
    });
}

void write_jsonl(const std::filesystem::path& path, std::span<const ContextRecord> rows) {
    write_rows(path, rows, [](const ContextRecord& r) {
        return ordered_json{{"user_id", r.user_id},
                            {"query", r.query},
                            {"ordinals", r.ordinals},
                            {"scores", r.scores}};
    });
}

void write_jsonl(const std::filesystem::path& path, std::span<const GenerationRecord> rows) {
    write_rows(path, rows, [](const GenerationRecord& r) {
        return ordered_json{{"user_id", r.user_id},         {"query", r.query},
                            {"generations", r.generations}, {"scores", r.scores},
                            {"chosen", r.chosen}};
    });
}

void write_jsonl(const std::filesystem::path& path, std::span<const Prediction> rows) {
    write_rows(path, rows, [](const Prediction& p) {
        ordered_json j{{"user_id", p.user_id}, {"query", p.query}};
        j["gold"] = p.gold ? ordered_json(*p.gold) : ordered_json(nullptr);
        j["prediction"] = p.prediction;
        return j;
    });
}

std::vector<RerankerCandidate> read_reranker_candidates(const std::filesystem::path& path) {
    return read_rows(path, [](const ordered_json& j) {
        return RerankerCandidate{j.at("user_id").get<std::string>(), j.at("query").get<std::string>(),
                                 j.at("gold").get<std::string>(),
                                 j.at("item_ordinal").get<std::size_t>(), item_from(j.at("item")),
                                 parse_provenance(j.at("provenance").get<std::string>())};
    });
}

std::vector<RerankerExample> read_reranker_examples(const std::filesystem::path& path) {
    return read_rows(path, [](const ordered_json& j) {
        return RerankerExample{j.at("user_id").get<std::string>(), j.at("x").get<std::string>(),
                               j.at("y").get<int>(),
                               parse_provenance(j.at("provenance").get<std::string>())};
    });
}

std::vector<AdapterExample> read_adapter_examples(const std::filesystem::path& path) {
    return read_rows(path, [](const ordered_json& j) {
        return AdapterExample{j.at("user_id").get<std::string>(), j.at("x").get<std::string>(),
                              j.at("y").get<int>()};
    });
}

std::vector<ContextRecord> read_contexts(const std::filesystem::path& path) {
    return read_rows(path, [](const ordered_json& j) {
        return ContextRecord{j.at("user_id").get<std::string>(), j.at("query").get<std::string>(),
                             j.at("ordinals").get<std::vector<std::size_t>>(),
                             j.at("scores").get<std::vector<double>>()};
    });
}

std::vector<GenerationRecord> read_generations(const std::filesystem::path& path) {
    return read_rows(path, [](const ordered_json& j) {
        return GenerationRecord{j.at("user_id").get<std::string>(), j.at("query").get<std::string>(),
                                j.at("generations").get<std::vector<std::string>>(),
                                j.at("scores").get<std::vector<double>>(),
                                j.at("chosen").get<std::size_t>()};
    });
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
    return read_rows(path, [](const ordered_json& j) {
        Prediction p{j.at("user_id").get<std::string>(), j.at("query").get<std::string>(),
                     std::nullopt, j.at("prediction").get<std::string>()};
        if (j.contains("gold") && !j.at("gold").is_null()) {
            p.gold = j.at("gold").get<std::string>();
        }
        return p;
    });
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    auto out = open_out(path);
    out << text;
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
}

}  // namespace hydra
