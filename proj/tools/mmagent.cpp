// mmagent: ingest, ask, bench, sweep, report.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include "mmagent/config.hpp"
#include "mmagent/eval.hpp"
#include "mmagent/search/embedding.hpp"
#include "mmagent/search/index.hpp"
#include "mmagent/text.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace mmagent;

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

struct UsageError : Error {
    using Error::Error;
};

struct GlobalFlags {
    std::string config;
    std::optional<int> max_turns;
    std::optional<int> top_k;
    std::optional<double> tau;
    std::string tools;
    int concurrency = 1;
    std::string mock_script;
    std::string index;
    bool direct = false;
};

void require_path(const std::string& path, const char* what) {
    if (!fs::exists(path)) throw UsageError(std::string(what) + " not found: " + path);
}

AppConfig resolve_config(const GlobalFlags& g) {
    AppConfig c;
    if (!g.config.empty()) {
        require_path(g.config, "config file");
        c = load_config(g.config);
    }
    apply_environment(c, process_environment());
    if (g.max_turns) {
        if (*g.max_turns < 1) throw UsageError("--max-turns must be >= 1");
        c.pipeline.max_turns = *g.max_turns;
    }
    if (g.top_k) c.pipeline.retrieval.top_k = *g.top_k;
    if (g.tau) c.pipeline.retrieval.tau = *g.tau;
    try {
        c.pipeline.retrieval.validate();
        if (!g.tools.empty()) c.pipeline.pool = parse_tool_list(g.tools);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (!g.index.empty()) c.index_dir = g.index;
    c.pipeline.direct_prompting = g.direct;
    if (g.concurrency < 1) throw UsageError("--concurrency must be >= 1");
    if (g.mock_script.empty() && c.model.endpoint.empty())
        throw UsageError("no model configured: set an endpoint (config file or MMAGENT_ENDPOINT) or pass --mock-script");
    if (!g.mock_script.empty()) require_path(g.mock_script, "mock script");
    return c;
}

/// Long-lived collaborators shared by every task of a run.
struct Runtime {
    AppConfig config;
    PromptAssets prompts;
    std::optional<PassageIndex> index;
    std::unique_ptr<EmbeddingProvider> embeddings;
    std::unique_ptr<CodeExecutor> code;

    explicit Runtime(AppConfig c) : config(std::move(c)) {
        if (config.prompts_dir) {
            require_path(config.prompts_dir->string(), "prompt directory");
            prompts = PromptAssets::with_overrides(*config.prompts_dir);
        } else {
            prompts = PromptAssets::builtin();
        }
        if (config.index_dir) {
            require_path(config.index_dir->string(), "index directory");
            index = PassageIndex::load(*config.index_dir);
        }
        if (config.embedding_endpoint) embeddings = std::make_unique<HttpEmbeddingProvider>(*config.embedding_endpoint);
        if (!config.runner_command.empty()) {
            SandboxConfig sc;
            sc.runner_command = config.runner_command;
            sc.max_concurrent = config.sandbox_concurrency;
            code = std::make_unique<SandboxRunner>(std::move(sc));
        }
    }

    PipelineServices services() const {
        PipelineServices s;
        s.prompts = &prompts;
        s.index = index ? &*index : nullptr;
        s.embeddings = embeddings.get();
        s.code = code.get();
        return s;
    }
};

/// A script file serves every example; a directory holds <id>.json per example.
ModelFactory make_factory(const AppConfig& config, const std::string& mock_script) {
    if (mock_script.empty()) {
        auto shared = std::make_shared<HttpChatModel>(config.model);
        return [shared](const Example&) {
            struct Borrowed final : Model {
                std::shared_ptr<HttpChatModel> inner;
                Completion complete(std::span<const Message> m, const DecodingConfig& d) override {
                    return inner->complete(m, d);
                }
            };
            auto b = std::make_unique<Borrowed>();
            b->inner = shared;
            return ModelBinding{std::move(b), nullptr};
        };
    }
    const fs::path path(mock_script);
    if (fs::is_directory(path)) {
        return [path](const Example& ex) {
            const auto file = path / (safe_file_stem(ex.id) + ".json");
            if (!fs::exists(file)) throw Error("no mock script for example " + ex.id + ": " + file.string());
            auto clock = std::make_shared<ManualClock>();
            return ModelBinding{std::make_unique<ScriptedModel>(load_script(file), clock), clock};
        };
    }
    auto script = load_script(path);
    return [script](const Example&) {
        auto clock = std::make_shared<ManualClock>();
        return ModelBinding{std::make_unique<ScriptedModel>(script, clock), clock};
    };
}

void write_text(const fs::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << body;
}

std::string timestamp() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

std::vector<int> parse_values(const std::string& csv) {
    std::vector<int> out;
    for (const auto& part : split(csv, ',')) {
        const auto t = trim(part);
        if (t.empty()) continue;
        // a..b expands to an inclusive range
        if (auto dots = t.find(".."); dots != std::string_view::npos) {
            const int lo = std::stoi(std::string(t.substr(0, dots)));
            const int hi = std::stoi(std::string(t.substr(dots + 2)));
            if (hi < lo) throw UsageError("empty range " + std::string(t));
            for (int v = lo; v <= hi; ++v) out.push_back(v);
        } else {
            out.push_back(std::stoi(std::string(t)));
        }
    }
    if (out.empty()) throw UsageError("--values is empty");
    return out;
}

int cmd_ingest(const std::string& dump, const std::string& out_dir, const GlobalFlags& g, const IngestOptions& opts) {
    require_path(dump, "dump");
    AppConfig config;
    if (!g.config.empty()) {
        require_path(g.config, "config file");
        config = load_config(g.config);
    }
    std::ifstream in(dump);
    if (!in) throw UsageError("cannot read dump: " + dump);
    std::unique_ptr<EmbeddingProvider> provider;
    if (config.embedding_endpoint) provider = std::make_unique<HttpEmbeddingProvider>(*config.embedding_endpoint);

    IngestReport report;
    PassageIndex index = build_index(in, opts, provider.get(), &report);
    index.save(out_dir);
    auto snap = snapshot(config);
    snap["ingest"] = {{"dump", dump},
                      {"min_words", opts.min_words},
                      {"chunk_size", opts.chunk_size},
                      {"chunk_overlap", opts.chunk_overlap}};
    write_text(fs::path(out_dir) / "config.json", snap.dump(2) + "\n");

    const auto& s = report.stats;
    std::cout << "pages kept: " << report.pages.kept << "\n"
              << "pages dropped: " << report.pages.dropped << "\n"
              << "documents: " << s.doc_count << "\n"
              << "passages: " << s.passage_count << "\n"
              << "avg passage length: " << s.avg_passage_len << "\n"
              << "vocabulary: " << s.vocabulary_size << "\n"
              << "embeddings: " << (index.has_embeddings() ? "yes" : "no") << "\n"
              << "index written to " << out_dir << "\n";
    return 0;
}

int cmd_ask(const std::string& question, const std::string& image, const std::vector<std::string>& options,
            const std::string& trace_dir, const GlobalFlags& g) {
    AppConfig config = resolve_config(g);
    if (!image.empty() && image.find("://") == std::string::npos) require_path(image, "image");
    Runtime rt(std::move(config));

    Example ex;
    ex.id = "ask-" + timestamp();
    ex.question = question;
    if (!image.empty()) ex.image = ImageRef{image};
    ex.options = options;
    ModelBinding binding = make_factory(rt.config, g.mock_script)(ex);

    PipelineServices services = rt.services();
    if (binding.clock) services.clock = binding.clock.get();
    PipelineResult result = run_pipeline(ex.task(), *binding.model, rt.config.pipeline, services);

    fs::create_directories(trace_dir);
    const fs::path trace_path = fs::path(trace_dir) / (ex.id + ".json");
    auto log = trace_log(result);
    log["config"] = snapshot(rt.config);
    write_text(trace_path, log.dump(2) + "\n");

    std::cout << result.answer.text << "\n";
    for (const auto& w : result.answer.warnings) std::cerr << "warning: " << w << "\n";
    std::cerr << "turns: " << result.trace.turns_used << " (" << termination_name(result.trace.terminated_by)
              << ")\n"
              << "trace: " << trace_path.string() << "\n";
    return 0;
}

int cmd_bench(const std::string& dataset_path, const std::string& out_dir, const GlobalFlags& g) {
    require_path(dataset_path, "dataset");
    AppConfig config = resolve_config(g);
    auto dataset = load_dataset(dataset_path);
    Runtime rt(std::move(config));

    BenchmarkOptions opts;
    opts.concurrency = g.concurrency;
    opts.out_dir = out_dir;
    opts.config_snapshot = snapshot(rt.config);
    opts.config_snapshot["dataset"] = dataset_path;
    auto result = run_benchmark(dataset, rt.config.pipeline, rt.services(), make_factory(rt.config, g.mock_script),
                                opts);
    std::cout << render_table({{fs::path(dataset_path).stem().string(), result.report}});
    if (result.report.errors > 0) std::cerr << result.report.errors << " example(s) failed; see " << out_dir << "\n";
    std::cerr << "records: " << (fs::path(out_dir) / "records").string() << "\n";
    return 0;
}

int cmd_sweep(const std::string& dataset_path, const std::string& param, const std::string& values,
              const std::string& out_dir, const GlobalFlags& g) {
    require_path(dataset_path, "dataset");
    SweepParameter p;
    try {
        p = parse_sweep_parameter(param);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const auto vals = parse_values(values);
    AppConfig config = resolve_config(g);
    auto dataset = load_dataset(dataset_path);
    Runtime rt(std::move(config));

    BenchmarkOptions opts;
    opts.concurrency = g.concurrency;
    opts.out_dir = out_dir;
    opts.config_snapshot = snapshot(rt.config);
    opts.config_snapshot["dataset"] = dataset_path;
    auto results =
        sweep(p, vals, dataset, rt.config.pipeline, rt.services(), make_factory(rt.config, g.mock_script), opts);
    const auto csv = sweep_csv(results);
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "sweep.csv", csv);
    std::cout << csv;
    return 0;
}

int cmd_report(const std::vector<std::string>& dirs) {
    std::vector<std::pair<std::string, Report>> rows;
    for (const auto& d : dirs) {
        nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
        if (std::ifstream in(fs::path(d) / "config.json"); in) {
            auto parsed = nlohmann::ordered_json::parse(in, nullptr, false);
            if (!parsed.is_discarded()) cfg = std::move(parsed);
        }
        auto report = aggregate(load_records(d), std::move(cfg));
        std::string name = fs::path(d).filename().string();
        if (name.empty()) name = fs::path(d).parent_path().filename().string();
        rows.emplace_back(name, std::move(report));
    }
    std::cout << render_table(rows);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tool-augmented multimodal question answering"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalFlags g;
    app.add_option("--config", g.config, "JSON config file");
    app.add_option("--max-turns", g.max_turns, "Executor turn budget");
    app.add_option("--top-k", g.top_k, "Passages per search call");
    app.add_option("--tau", g.tau, "Cross-modal similarity cutoff");
    app.add_option("--tools", g.tools, "Tool pool, e.g. search,code");
    app.add_option("--concurrency", g.concurrency, "Parallel examples");
    app.add_option("--mock-script", g.mock_script, "Scripted replies: a file, or a directory of <id>.json");
    app.add_option("--index", g.index, "Passage index directory");
    app.add_flag("--direct", g.direct, "Single model call, no planning or tools");

    auto* ingest = app.add_subcommand("ingest", "Filter, chunk and index a corpus dump");
    std::string dump, index_out;
    IngestOptions ingest_opts;
    ingest->add_option("dump", dump, "NDJSON dump of {id, title, text}")->required();
    ingest->add_option("out", index_out, "Output index directory")->required();
    ingest->add_option("--min-words", ingest_opts.min_words, "Drop pages with fewer words");
    ingest->add_option("--chunk-size", ingest_opts.chunk_size, "Tokens per passage");
    ingest->add_option("--overlap", ingest_opts.chunk_overlap, "Tokens shared by neighbouring passages");

    auto* ask = app.add_subcommand("ask", "Answer one question");
    std::string question, image, trace_dir = "traces";
    std::vector<std::string> options;
    ask->add_option("question", question)->required();
    ask->add_option("--image", image, "Image path or URL");
    ask->add_option("--options", options, "Answer options, in label order");
    ask->add_option("--trace-dir", trace_dir, "Where the trace log goes")->capture_default_str();

    auto* bench = app.add_subcommand("bench", "Run a dataset and report accuracy and latency");
    std::string dataset, out_dir = "runs/bench";
    bench->add_option("dataset", dataset, "JSONL dataset")->required();
    bench->add_option("--out", out_dir, "Output directory")->capture_default_str();

    auto* sweep_cmd = app.add_subcommand("sweep", "Benchmark once per parameter value");
    std::string param, values, sweep_out = "runs/sweep";
    sweep_cmd->add_option("dataset", dataset, "JSONL dataset")->required();
    sweep_cmd->add_option("--param", param, "top_k or max_turns")->required();
    sweep_cmd->add_option("--values", values, "Comma list; a..b for ranges")->required();
    sweep_cmd->add_option("--out", sweep_out, "Output directory")->capture_default_str();

    auto* report = app.add_subcommand("report", "Summarize run directories");
    std::vector<std::string> report_dirs;
    report->add_option("dirs", report_dirs, "Run directories")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kUsageError;
    }

    try {
        if (*ingest) return cmd_ingest(dump, index_out, g, ingest_opts);
        if (*ask) return cmd_ask(question, image, options, trace_dir, g);
        if (*bench) return cmd_bench(dataset, out_dir, g);
        if (*sweep_cmd) return cmd_sweep(dataset, param, values, sweep_out, g);
        if (*report) return cmd_report(report_dirs);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const DatasetError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeFailure;
    }
    return kUsageError;
}
