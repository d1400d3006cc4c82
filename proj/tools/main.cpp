// hydra: command-line front end for the personalization pipeline.
//
// Step commands read and write artifacts in the output directory, so a run
// can be split into stages:
//   gen-reranker-data -> train-reranker -> fit-reranker -> rerank
//   -> gen-adapter-data -> train-adapter -> fit-adapter -> infer -> evaluate
// `run` performs every stage in one process.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "hydra/audit.hpp"
#include "hydra/config.hpp"
#include "hydra/datamodel.hpp"
#include "hydra/error.hpp"
#include "hydra/model_io.hpp"
#include "hydra/pipeline.hpp"
#include "hydra/retriever.hpp"

namespace fs = std::filesystem;
using namespace hydra;

namespace {

struct Options {
    std::vector<std::string> config_files;
    std::vector<std::string> settings;
    std::optional<std::string> task;
    std::optional<std::string> data;
    std::optional<std::string> out;
    std::optional<std::string> mode;
    std::optional<std::string> backend;
    std::optional<std::uint64_t> seed;
    bool no_personal_reranker = false;
    bool no_personal_adapter = false;
    bool verbose = false;
    bool quiet = false;
    std::string input;   // ingest
    std::string output;  // ingest, synth
};

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("-c,--config", o.config_files,
                    "key = value config file; its values take precedence over flags")
        ->check(CLI::ExistingFile);
    cmd->add_option("-s,--set", o.settings, "override one config key (key=value), repeatable");
    cmd->add_option("--task", o.task, "LaMP-2N, LaMP-2M, LaMP-3, LaMP-4, LaMP-5 or Synthetic");
    cmd->add_option("--data", o.data, "dataset JSONL (synthetic data is generated when omitted)");
    cmd->add_option("-o,--out", o.out, "output / working directory");
    cmd->add_option("--mode", o.mode, "zero_shot, icl_random, rag, pag, hydra_reranker_only, "
                                      "hydra_adapter_only or hydra_full");
    cmd->add_option("--backend", o.backend, "simulator or http");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_flag("--no-personal-reranker", o.no_personal_reranker,
                  "route every user to one shared reranker head");
    cmd->add_flag("--no-personal-adapter", o.no_personal_adapter,
                  "route every user to one shared adapter head");
    cmd->add_flag("-v,--verbose", o.verbose, "debug logging");
    cmd->add_flag("-q,--quiet", o.quiet, "warnings and errors only");
}

RunConfig resolve(const Options& o) {
    RunConfig cfg;
    if (o.task) apply_setting(cfg, "task", *o.task);
    if (o.data) apply_setting(cfg, "data", *o.data);
    if (o.out) apply_setting(cfg, "output_dir", *o.out);
    if (o.mode) apply_setting(cfg, "mode", *o.mode);
    if (o.backend) apply_setting(cfg, "backend", *o.backend);
    if (o.seed) cfg.seed = *o.seed;
    if (o.no_personal_reranker) cfg.no_personal_reranker = true;
    if (o.no_personal_adapter) cfg.no_personal_adapter = true;
    for (const auto& s : o.settings) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("--set expects key=value, got \"" + s + "\"");
        }
        apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& file : o.config_files) {
        cfg = load_config(file, cfg);
    }
    validate(cfg);
    return cfg;
}

fs::path workdir(const RunConfig& cfg) {
    if (cfg.output_dir.empty()) {
        throw ConfigError("this command needs an output directory (--out or output_dir)");
    }
    fs::create_directories(cfg.output_dir);
    return cfg.output_dir;
}

fs::path require_file(const fs::path& p) {
    if (!fs::exists(p)) {
        throw DataError("missing artifact " + p.string() + "; run the earlier stage first");
    }
    return p;
}

std::optional<FactorizedModel> optional_model(const fs::path& p, const RunConfig& cfg) {
    if (!fs::exists(p)) {
        return std::nullopt;
    }
    return load_model(p, cfg.encoder);
}

template <typename T>
std::span<const T> view(const std::vector<T>& v) {
    return std::span<const T>(v);
}

int cmd_ingest(const Options& o) {
    RunConfig cfg = resolve(o);
    if (o.input.empty()) {
        throw ConfigError("ingest needs --input");
    }
    cfg.data_path = o.input;
    const Dataset ds = prepare_dataset(cfg);
    const fs::path dest = o.output.empty() ? workdir(cfg) / "dataset.jsonl" : fs::path(o.output);
    save_dataset(ds, dest);
    std::printf("%zu train users, %zu test users -> %s\n", ds.train_users.size(),
                ds.test_users.size(), dest.string().c_str());
    return kExitOk;
}

int cmd_synth(const Options& o) {
    RunConfig cfg = resolve(o);
    cfg.data_path.clear();
    const Dataset ds = prepare_dataset(cfg);
    const fs::path dest = o.output.empty() ? workdir(cfg) / "dataset.jsonl" : fs::path(o.output);
    save_dataset(ds, dest);
    std::printf("synthetic task: %zu train users, %zu test users, %zu conflicting query texts -> %s\n",
                ds.train_users.size(), ds.test_users.size(), conflicting_queries(ds).size(),
                dest.string().c_str());
    return kExitOk;
}

int cmd_index(const Options& o) {
    const RunConfig cfg = resolve(o);
    const Dataset ds = prepare_dataset(cfg);
    const fs::path dir = workdir(cfg);
    std::vector<ContextRecord> contexts;
    std::size_t docs = 0;
    std::size_t terms = 0;
    for (const auto* users : {&ds.train_users, &ds.test_users}) {
        for (const auto& user : *users) {
            const HistoryIndex index = build_index(user.history);
            docs += index.n_docs();
            terms += index.postings().size();
            ContextRecord rec{user.user_id, user.query, {}, {}};
            for (const auto& hit : retrieve_top(index, user.query, cfg.rerank.N)) {
                rec.ordinals.push_back(hit.ordinal);
                rec.scores.push_back(hit.score);
            }
            contexts.push_back(std::move(rec));
        }
    }
    write_jsonl(dir / "bm25_topN.jsonl", view(contexts));
    std::printf("indexed %zu users, %zu documents, %zu distinct per-user terms\n", contexts.size(),
                docs, terms);
    return kExitOk;
}

int cmd_gen_reranker_data(const Options& o) {
    const RunConfig cfg = resolve(o);
    const Dataset ds = prepare_dataset(cfg);
    const fs::path dir = workdir(cfg);
    BackendStack stack(cfg);
    const auto data = gen_reranker_data(cfg, ds.task, ds.train_users, stack.backend());
    write_jsonl(dir / "reranker_candidates.jsonl", view(data.candidates));
    write_jsonl(dir / "reranker_examples.jsonl", view(data.examples));
    std::size_t positives = 0;
    for (const auto& e : data.examples) {
        positives += static_cast<std::size_t>(e.y);
    }
    std::printf("%zu reranker examples (%zu positive)\n", data.examples.size(), positives);
    return kExitOk;
}

int cmd_train_reranker(const Options& o) {
    const RunConfig cfg = resolve(o);
    const fs::path dir = workdir(cfg);
    const auto examples = read_reranker_examples(require_file(dir / "reranker_examples.jsonl"));
    const FactorizedModel model = train_reranker(cfg, examples);
    save_model(model, dir / "reranker.model");
    std::printf("reranker trained on %zu examples, %zu heads\n", examples.size(), model.heads().size());
    return kExitOk;
}

int cmd_fit_reranker(const Options& o) {
    const RunConfig cfg = resolve(o);
    const Dataset ds = prepare_dataset(cfg);
    const fs::path dir = workdir(cfg);
    FactorizedModel model = load_model(require_file(dir / "reranker.model"), cfg.encoder);
    BackendStack stack(cfg);
    const auto data = fit_reranker(cfg, ds.task, model, ds.test_users, stack.backend());
    write_jsonl(dir / "reranker_fit_candidates.jsonl", view(data.candidates));
    write_jsonl(dir / "reranker_fit_examples.jsonl", view(data.examples));
    save_model(model, dir / "reranker.model");
    std::printf("fitted %zu test-user reranker heads\n", cfg.no_personal_reranker ? 0 : ds.test_users.size());
    return kExitOk;
}

int cmd_rerank(const Options& o) {
    const RunConfig cfg = resolve(o);
    const Dataset ds = prepare_dataset(cfg);
    const fs::path dir = workdir(cfg);
    const auto model = optional_model(dir / "reranker.model", cfg);
    if (!model && uses_reranker(cfg.mode)) {
        throw DataError("mode " + std::string(to_string(cfg.mode)) + " needs reranker.model");
    }
    const auto contexts =
        select_contexts(cfg, uses_reranker(cfg.mode) ? &*model : nullptr, ds.test_users);
    write_jsonl(dir / "contexts.jsonl", view(contexts));
    std::printf("%zu contexts written\n", contexts.size());
    return kExitOk;
}

int cmd_gen_adapter_data(const Options& o) {
    const RunConfig cfg = resolve(o);
    const Dataset ds = prepare_dataset(cfg);
    const fs::path dir = workdir(cfg);
    const auto reranker = uses_reranker(cfg.mode) ? optional_model(dir / "reranker.model", cfg)
                                                  : std::nullopt;
    BackendStack stack(cfg);
    const auto examples = gen_adapter_data(cfg, ds.task, reranker ? &*reranker : nullptr,
                                           ds.train_users, stack.backend(), true);
    write_jsonl(dir / "adapter_examples.jsonl", view(examples));
    std::printf("%zu adapter examples\n", examples.size());
    return kExitOk;
}

int cmd_train_adapter(const Options& o) {
    const RunConfig cfg = resolve(o);
    const fs::path dir = workdir(cfg);
    const auto examples = read_adapter_examples(require_file(dir / "adapter_examples.jsonl"));
    const FactorizedModel model = train_adapter(cfg, examples);
    save_model(model, dir / "adapter.model");
    std::printf("adapter trained on %zu examples, %zu heads\n", examples.size(), model.heads().size());
    return kExitOk;
}

int cmd_fit_adapter(const Options& o) {
    const RunConfig cfg = resolve(o);
    const Dataset ds = prepare_dataset(cfg);
    const fs::path dir = workdir(cfg);
    FactorizedModel adapter = load_model(require_file(dir / "adapter.model"), cfg.encoder);
    const auto reranker = uses_reranker(cfg.mode) ? optional_model(dir / "reranker.model", cfg)
                                                  : std::nullopt;
    BackendStack stack(cfg);
    const auto examples = fit_adapter(cfg, ds.task, adapter, reranker ? &*reranker : nullptr,
                                      ds.test_users, stack.backend());
    write_jsonl(dir / "adapter_fit_examples.jsonl", view(examples));
    save_model(adapter, dir / "adapter.model");
    std::printf("fitted adapter heads on %zu examples\n", examples.size());
    return kExitOk;
}

int cmd_infer(const Options& o) {
    const RunConfig cfg = resolve(o);
    const Dataset ds = prepare_dataset(cfg);
    const fs::path dir = workdir(cfg);
    const auto contexts = read_contexts(require_file(dir / "contexts.jsonl"));
    std::optional<FactorizedModel> adapter;
    if (uses_adapter(cfg.mode)) {
        adapter = load_model(require_file(dir / "adapter.model"), cfg.encoder);
    }
    BackendStack stack(cfg);
    const auto out = infer(cfg, ds.task, ds.test_users, contexts, adapter ? &*adapter : nullptr,
                           stack.backend());
    write_jsonl(dir / "generations.jsonl", view(out.generations));
    write_jsonl(dir / "predictions.jsonl", view(out.predictions));
    std::printf("%zu predictions written\n", out.predictions.size());
    return kExitOk;
}

int cmd_evaluate(const Options& o) {
    const RunConfig cfg = resolve(o);
    const fs::path dir = workdir(cfg);
    const auto predictions = read_predictions(require_file(dir / "predictions.jsonl"));
    const MetricReport report = evaluate(task_spec(cfg.task), predictions);
    write_text(dir / "metrics.json", report.to_json() + "\n");
    write_text(dir / "metrics.txt", report.to_text());
    std::fputs(report.to_text().c_str(), stdout);
    return kExitOk;
}

int cmd_run(const Options& o) {
    const RunConfig cfg = resolve(o);
    const Dataset ds = prepare_dataset(cfg);
    BackendStack stack(cfg);
    const RunResult result = run(cfg, ds, stack.backend());
    if (!cfg.output_dir.empty()) {
        write_run_outputs(cfg.output_dir, cfg, result);
    }
    std::fputs(result.report.to_text().c_str(), stdout);
    if (const LlmCache* cache = stack.cache()) {
        spdlog::info("backend calls {}, cache hits {}, misses {}", stack.backend_calls(),
                     cache->hits(), cache->misses());
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"HYDRA black-box LLM personalization pipeline"};
    app.require_subcommand(1);
    Options opts;

    struct Command {
        const char* name;
        const char* help;
        int (*fn)(const Options&);
    };
    const std::vector<Command> commands = {
        {"ingest", "validate a LaMP-style JSONL file and write it in canonical form", cmd_ingest},
        {"synth", "generate the synthetic conflict task", cmd_synth},
        {"index", "build per-user BM25 indexes and dump top-N retrievals", cmd_index},
        {"gen-reranker-data", "build and label reranker training candidates", cmd_gen_reranker_data},
        {"train-reranker", "train the reranker base and training-user heads", cmd_train_reranker},
        {"fit-reranker", "fit reranker heads for test users with the base frozen", cmd_fit_reranker},
        {"rerank", "select the context for each test query", cmd_rerank},
        {"gen-adapter-data", "sample and label adapter training generations", cmd_gen_adapter_data},
        {"train-adapter", "train the adapter base and training-user heads", cmd_train_adapter},
        {"fit-adapter", "fit adapter heads for test users with the base frozen", cmd_fit_adapter},
        {"infer", "generate answers for test queries (best-of-b with an adapter)", cmd_infer},
        {"evaluate", "score predictions with the task metrics", cmd_evaluate},
        {"run", "run the configured mode end to end", cmd_run},
    };
    std::vector<std::pair<CLI::App*, const Command*>> subs;
    for (const auto& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        add_common(sub, opts);
        if (std::string_view(c.name) == "ingest") {
            sub->add_option("-i,--input", opts.input, "source JSONL")->required();
        }
        if (std::string_view(c.name) == "ingest" || std::string_view(c.name) == "synth") {
            sub->add_option("--output", opts.output, "destination (default <out>/dataset.jsonl)");
        }
        subs.emplace_back(sub, &c);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    spdlog::set_default_logger(spdlog::stderr_color_mt("hydra"));
    spdlog::set_level(opts.verbose ? spdlog::level::debug
                                   : (opts.quiet ? spdlog::level::warn : spdlog::level::info));

    for (const auto& [sub, cmd] : subs) {
        if (!sub->parsed()) {
            continue;
        }
        try {
            return cmd->fn(opts);
        } catch (const std::exception& e) {
            spdlog::error("{}: {}", cmd->name, e.what());
            return exit_code_for(e);
        }
    }
    return kExitFailure;
}
