// dolores command line: run tasks, benchmark scaffolds, generate worlds,
// lint example libraries, and inspect traces.

#include <dolores/baselines.hpp>
#include <dolores/config.hpp>
#include <dolores/corpus.hpp>
#include <dolores/kernel.hpp>
#include <dolores/world.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

namespace {

using namespace dolores;

// process exit statuses
constexpr int kOk = 0;            // task finished
constexpr int kTaskFailed = 1;    // run failed or exhausted a budget
constexpr int kConfigError = 2;   // bad configuration or input files
constexpr int kBackendError = 3;  // transport failure or backend refusal

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

struct BackendSetup {
    std::unique_ptr<Backend> backend;
    bool approximate_tokens = false;  // mock counts words, not tokens
};

BackendSetup make_backend(const ConfigFile& cfg) {
    BackendSetup setup;
    std::string kind = cfg.get("backend", "kind", "mock");
    if (kind == "mock") {
        std::string path = cfg.require("backend", "mock_script");
        MockScript script;
        try {
            script = MockScript::parse(read_text_file(path));
        } catch (const FormatError& e) {
            throw ConfigError(path + ": " + e.what());
        }
        setup.backend = std::make_unique<MockBackend>(std::move(script));
        setup.approximate_tokens = true;
    } else if (kind == "http") {
        setup.backend = std::make_unique<HttpBackend>(http_backend_config_from(cfg));
    } else {
        throw ConfigError("unknown backend kind " + kind + " (mock | http)");
    }
    return setup;
}

std::vector<HostFunction> corpus_tools(const CorpusIndex& index) {
    return {make_search_host(index), make_retrieve_host(index)};
}

int exit_for_status(ThreadStatus status) {
    return status == ThreadStatus::Finished ? kOk : kTaskFailed;
}

// --- run -------------------------------------------------------------------

struct RunArgs {
    std::string config_path;
    std::string task;
    std::string ns;
    std::string corpus_dir;
    std::string out_dir;
    bool timestamps = false;
};

int cmd_run(const RunArgs& args) {
    ConfigFile cfg = ConfigFile::parse_file(args.config_path);
    KernelConfig kc = kernel_config_from(cfg);
    ExampleLibrary library = load_library_file(cfg.require("prompt", "examples"));
    BackendSetup backend = make_backend(cfg);
    UsageLedger ledger;
    Gateway gateway(*backend.backend, ledger);

    std::vector<HostFunction> tools;
    CorpusIndex index;
    if (!args.corpus_dir.empty()) {
        index = build_index(load_corpus_dir(args.corpus_dir));
        tools = corpus_tools(index);
    }

    TaskSpec spec;
    spec.task = args.task;
    spec.ns = args.ns;
    Kernel kernel(library, kc, gateway, tools);
    RunResult result = kernel.run(spec);

    std::string answer = result.status == ThreadStatus::Finished
                             ? str_render(result.answer)
                             : "";
    std::cout << "status: " << thread_status_name(result.status) << "\n";
    if (result.status == ThreadStatus::Finished)
        std::cout << "answer: " << answer << "\n";
    std::cout << render_usage_table(result.usage, backend.approximate_tokens);

    if (!args.out_dir.empty()) {
        std::filesystem::path dir(args.out_dir);
        std::filesystem::create_directories(dir);
        write_file(dir / "answer.txt", answer + "\n");
        write_file(dir / "trace.ndjson",
                   trace_ndjson(result.trace, args.timestamps));
        write_file(dir / "usage.ndjson", ledger.export_ndjson());
        write_file(dir / "usage.txt",
                   render_usage_table(result.usage, backend.approximate_tokens));
        write_file(dir / "config_snapshot.ini", cfg.source());
    }
    return exit_for_status(result.status);
}

// --- bench -----------------------------------------------------------------

struct BenchArgs {
    std::string config_path;
    std::string corpus_dir;
    std::string questions_path;
    std::string scaffold = "recursive";
    std::string out_dir;
};

int cmd_bench(const BenchArgs& args) {
    ConfigFile cfg = ConfigFile::parse_file(args.config_path);
    KernelConfig kc = kernel_config_from(cfg);
    ExampleLibrary library = load_library_file(cfg.require("prompt", "examples"));
    BackendSetup backend = make_backend(cfg);
    UsageLedger ledger;
    Gateway gateway(*backend.backend, ledger);

    CorpusIndex index = build_index(load_corpus_dir(args.corpus_dir));
    std::vector<QuestionSpec> questions;
    try {
        questions = parse_questions_ndjson(read_text_file(args.questions_path));
    } catch (const FormatError& e) {
        throw ConfigError(args.questions_path + ": " + e.what());
    }
    if (questions.empty())
        throw ConfigError(args.questions_path + ": no questions");

    ScoreReport report = benchmark(scaffold_from_string(args.scaffold), index,
                                   questions, library, kc, gateway);
    std::cout << render_score_report(report);
    if (!args.out_dir.empty()) {
        std::filesystem::path dir(args.out_dir);
        std::filesystem::create_directories(dir);
        write_file(dir / "scores.ndjson", score_report_ndjson(report));
        write_file(dir / "scores.txt", render_score_report(report));
        write_file(dir / "usage.ndjson", ledger.export_ndjson());
        write_file(dir / "config_snapshot.ini", cfg.source());
    }
    return kOk;
}

// --- world gen -------------------------------------------------------------

struct WorldGenArgs {
    int size = 50;
    std::uint64_t seed = 1;
    int questions = 20;
    std::uint64_t question_seed = 1;
    int max_hops = 4;
    std::string out_dir;
};

int cmd_world_gen(const WorldGenArgs& args) {
    WorldSpec spec;
    spec.size = args.size;
    spec.seed = args.seed;
    WorldGraph world = generate_world(spec);
    if (auto why = validate_world(world))
        throw ConfigError("generated world failed validation: " + *why);
    std::vector<Document> articles = render_articles(world);
    std::vector<QuestionSpec> questions =
        generate_questions(world, args.questions, args.question_seed,
                           args.max_hops);

    std::filesystem::path dir(args.out_dir);
    std::filesystem::create_directories(dir);
    write_file(dir / "world.ndjson", world_ndjson(world));
    write_file(dir / "questions.ndjson", questions_ndjson(questions));
    save_corpus_dir(articles, dir / "articles");
    std::cout << "world: " << world.persons.size() << " persons, "
              << articles.size() << " articles, " << questions.size()
              << " questions\n";
    return kOk;
}

// --- examples lint ---------------------------------------------------------

int cmd_examples_lint(const std::string& path) {
    ExampleLibrary library = load_library_file(path);
    if (library.empty()) throw ConfigError(path + ": no examples");
    std::cout << library.size() << " examples, " << library.namespaces().size()
              << " namespaces\n";
    for (const std::string& ns : library.namespaces()) {
        size_t n = library.select(ns).size();
        std::cout << "  " << ns << ": " << n << (n == 1 ? " example" : " examples")
                  << "\n";
    }
    return kOk;
}

// --- trace show ------------------------------------------------------------

struct TraceShowArgs {
    std::string path;
    std::string thread;
    std::string kind;
};

int cmd_trace_show(const TraceShowArgs& args) {
    std::vector<TraceEvent> events;
    try {
        events = parse_trace_ndjson(read_text_file(args.path));
    } catch (const FormatError& e) {
        throw ConfigError(args.path + ": " + e.what());
    }
    int shown = 0;
    for (const TraceEvent& e : events) {
        if (!args.thread.empty() && e.thread_id != args.thread) continue;
        if (!args.kind.empty() && trace_kind_name(e.kind) != args.kind) continue;
        std::cout << e.thread_id << " #" << e.seq << " "
                  << trace_kind_name(e.kind) << " " << e.payload.dump() << "\n";
        ++shown;
    }
    std::cout << shown << " of " << events.size() << " events\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dolores: recursive meta-reasoning agent runtime"};
    app.require_subcommand(1);

    RunArgs run_args;
    CLI::App* run = app.add_subcommand("run", "Run one task to completion");
    run->add_option("--config", run_args.config_path, "config file")->required();
    run->add_option("--task", run_args.task, "task text")->required();
    run->add_option("--namespace", run_args.ns, "example namespace");
    run->add_option("--corpus", run_args.corpus_dir,
                    "article directory exposed as search/retrieve_article");
    run->add_option("--out", run_args.out_dir, "output directory");
    run->add_flag("--timestamps", run_args.timestamps,
                  "include wall-clock timestamps in the trace");

    BenchArgs bench_args;
    CLI::App* bench =
        app.add_subcommand("bench", "Score a scaffold on a question set");
    bench->add_option("--config", bench_args.config_path, "config file")
        ->required();
    bench->add_option("--corpus", bench_args.corpus_dir, "article directory")
        ->required();
    bench->add_option("--questions", bench_args.questions_path,
                      "questions ndjson")
        ->required();
    bench->add_option("--scaffold", bench_args.scaffold,
                      "recursive | react | codeact");
    bench->add_option("--out", bench_args.out_dir, "output directory");

    CLI::App* world = app.add_subcommand("world", "Synthetic world tools");
    world->require_subcommand(1);
    WorldGenArgs world_args;
    CLI::App* world_gen = world->add_subcommand(
        "gen", "Generate a world with articles and questions");
    world_gen->add_option("--size", world_args.size, "number of persons");
    world_gen->add_option("--seed", world_args.seed, "world seed");
    world_gen->add_option("--questions", world_args.questions,
                          "number of questions");
    world_gen->add_option("--question-seed", world_args.question_seed,
                          "question seed");
    world_gen->add_option("--max-hops", world_args.max_hops,
                          "maximum chain length");
    world_gen->add_option("--out", world_args.out_dir, "output directory")
        ->required();

    CLI::App* examples = app.add_subcommand("examples", "Example library tools");
    examples->require_subcommand(1);
    std::string lint_path;
    CLI::App* lint =
        examples->add_subcommand("lint", "Validate an example library file");
    lint->add_option("--file", lint_path, "library file")->required();

    CLI::App* trace = app.add_subcommand("trace", "Trace tools");
    trace->require_subcommand(1);
    TraceShowArgs trace_args;
    CLI::App* show = trace->add_subcommand("show", "Pretty-print a trace file");
    show->add_option("--file", trace_args.path, "trace ndjson")->required();
    show->add_option("--thread", trace_args.thread, "only this thread id");
    show->add_option("--kind", trace_args.kind, "only this event kind");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (run->parsed()) return cmd_run(run_args);
        if (bench->parsed()) return cmd_bench(bench_args);
        if (world->parsed()) return cmd_world_gen(world_args);
        if (examples->parsed()) return cmd_examples_lint(lint_path);
        if (trace->parsed()) return cmd_trace_show(trace_args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const FormatError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const TransportError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kBackendError;
    } catch (const BackendRefusal& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kBackendError;
    } catch (const MockMiss& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kBackendError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kTaskFailed;
    }
    return kConfigError;
}
