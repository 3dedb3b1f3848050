#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <dolores/trace.hpp>
#include <dolores/world.hpp>

#include "fixtures.hpp"
#include "trace_checks.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

using namespace dolores;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string output;  // stdout and stderr interleaved
};

CliResult run_cli(const std::string& args) {
    std::string cmd = std::string(DOLORES_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CliResult res;
    char buf[4096];
    size_t n;
    while ((n = ::fread(buf, 1, sizeof(buf), pipe)) > 0) res.output.append(buf, n);
    int status = ::pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void spit(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name)
        : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string assets() { return DOLORES_ASSETS_DIR; }

std::string mock_config(const fs::path& mock_path,
                        const std::string& extra = "") {
    return "[backend]\nkind = mock\nmock_script = " + mock_path.string() +
           "\n[prompt]\nmode = examples\nexamples = " + assets() +
           "/examples/decompositions.dexp\n" + extra;
}

}  // namespace

TEST_CASE("examples lint") {
    SUBCASE("bundled library") {
        CliResult res = run_cli("examples lint --file " + assets() +
                                "/examples/decompositions.dexp");
        CHECK(res.exit_code == 0);
        CHECK(res.output.find("3 examples, 3 namespaces") != std::string::npos);
        CHECK(res.output.find("lookup: 1 example") != std::string::npos);
    }
    SUBCASE("malformed library exits 2 and names the line") {
        TempDir tmp("dolores-cli-lint");
        spit(tmp.path / "bad.dexp",
             "[EXAMPLE namespace=\"x\"]\n[TASK]\nt\n[/EXAMPLE]\n");
        CliResult res =
            run_cli("examples lint --file " + (tmp.path / "bad.dexp").string());
        CHECK(res.exit_code == 2);
        CHECK(res.output.find("config error:") != std::string::npos);
    }
    SUBCASE("missing file exits 2") {
        CHECK(run_cli("examples lint --file /nonexistent.dexp").exit_code == 2);
    }
}

TEST_CASE("world gen is deterministic across invocations") {
    TempDir tmp("dolores-cli-worldgen");
    std::string common = "world gen --size 30 --seed 5 --questions 10 --out ";
    CliResult first = run_cli(common + (tmp.path / "a").string());
    CliResult second = run_cli(common + (tmp.path / "b").string());
    REQUIRE(first.exit_code == 0);
    REQUIRE(second.exit_code == 0);
    CHECK(first.output.find("30 persons") != std::string::npos);
    CHECK(slurp(tmp.path / "a" / "world.ndjson") ==
          slurp(tmp.path / "b" / "world.ndjson"));
    CHECK(slurp(tmp.path / "a" / "questions.ndjson") ==
          slurp(tmp.path / "b" / "questions.ndjson"));
    WorldGraph world = parse_world_ndjson(slurp(tmp.path / "a" / "world.ndjson"));
    CHECK(world.persons.size() == 30);
    CHECK(!validate_world(world).has_value());
    CHECK(fs::is_directory(tmp.path / "a" / "articles"));
    SUBCASE("a different seed changes the world") {
        CliResult other = run_cli("world gen --size 30 --seed 6 --out " +
                                  (tmp.path / "c").string());
        REQUIRE(other.exit_code == 0);
        CHECK(slurp(tmp.path / "a" / "world.ndjson") !=
              slurp(tmp.path / "c" / "world.ndjson"));
    }
    SUBCASE("invalid size exits 2") {
        CHECK(run_cli("world gen --size 1 --out " + (tmp.path / "d").string())
                  .exit_code == 2);
    }
}

TEST_CASE("run executes a task against the mock backend") {
    TempDir tmp("dolores-cli-run");
    spit(tmp.path / "answer.mock",
         "[RULE label=\"root\"]\n"
         "Simple arithmetic needs no recursion.\n"
         "<repl>\nFinalAnswer(6 * 7)\n</repl>\n"
         "[/RULE]\n");
    std::string config = mock_config(tmp.path / "answer.mock");
    spit(tmp.path / "config.ini", config);
    fs::path out = tmp.path / "out";
    CliResult res = run_cli("run --config " + (tmp.path / "config.ini").string() +
                            " --task 'What is six times seven?' --out " +
                            out.string());
    REQUIRE(res.exit_code == 0);
    CHECK(res.output.find("status: finished") != std::string::npos);
    CHECK(res.output.find("answer: 42") != std::string::npos);
    CHECK(slurp(out / "answer.txt") == "42\n");
    CHECK(slurp(out / "config_snapshot.ini") == config);
    CHECK(!slurp(out / "usage.ndjson").empty());

    std::vector<TraceEvent> events = parse_trace_ndjson(slurp(out / "trace.ndjson"));
    REQUIRE(!events.empty());
    auto check = dolores::testing::check_trace_tree(events);
    CHECK_MESSAGE(check.ok, check.why);
    CHECK(events.back().kind == TraceKind::FinalAnswer);
    // timestamps are omitted unless --timestamps is given
    CHECK(slurp(out / "trace.ndjson").find("timestamp") == std::string::npos);

    SUBCASE("trace show reads the file back") {
        CliResult shown =
            run_cli("trace show --file " + (out / "trace.ndjson").string());
        CHECK(shown.exit_code == 0);
        CHECK(shown.output.find("final-answer") != std::string::npos);
        CliResult filtered = run_cli("trace show --kind final-answer --file " +
                                     (out / "trace.ndjson").string());
        CHECK(filtered.exit_code == 0);
        CHECK(filtered.output.find("1 of ") != std::string::npos);
    }
}

TEST_CASE("run exit codes") {
    TempDir tmp("dolores-cli-exit");
    SUBCASE("budget exhaustion exits 1") {
        spit(tmp.path / "loop.mock",
             "[RULE label=\"root\"]\nStill thinking.\n<repl>\nprint(1)\n</repl>\n[/RULE]\n");
        spit(tmp.path / "config.ini",
             mock_config(tmp.path / "loop.mock",
                         "[budgets]\nmax_turns_per_thread = 2\n"));
        CliResult res = run_cli("run --config " +
                                (tmp.path / "config.ini").string() + " --task t");
        CHECK(res.exit_code == 1);
        CHECK(res.output.find("status: budget-exhausted") != std::string::npos);
    }
    SUBCASE("missing config exits 2") {
        CHECK(run_cli("run --config /nonexistent.ini --task t").exit_code == 2);
    }
    SUBCASE("bad backend kind exits 2") {
        spit(tmp.path / "bad.ini",
             "[backend]\nkind = carrier-pigeon\n[prompt]\nmode = examples\n"
             "examples = " + assets() + "/examples/decompositions.dexp\n");
        CHECK(run_cli("run --config " + (tmp.path / "bad.ini").string() +
                      " --task t").exit_code == 2);
    }
    SUBCASE("mock miss exits 3") {
        spit(tmp.path / "empty.mock",
             "[RULE label=\"nothing-matches-this\"]\nx\n[/RULE]\n");
        spit(tmp.path / "miss.ini", mock_config(tmp.path / "empty.mock"));
        CliResult res = run_cli("run --config " +
                                (tmp.path / "miss.ini").string() + " --task t");
        CHECK(res.exit_code == 3);
        CHECK(res.output.find("backend error:") != std::string::npos);
    }
    SUBCASE("unknown flag exits 2") {
        CHECK(run_cli("run --bogus-flag").exit_code == 2);
    }
}

TEST_CASE("bench scores a question set end to end") {
    TempDir tmp("dolores-cli-bench");
    // corpus and question from the hand-built world
    save_corpus_dir(render_articles(dolores::testing::coe_world()),
                    tmp.path / "articles");
    QuestionSpec q;
    q.chain = dolores::testing::coe_question_chain();
    q.surface = dolores::testing::coe_question_surface();
    q.gold = {"Bobbie Luu"};
    q.metric = Metric::SetF1;
    spit(tmp.path / "questions.ndjson", questions_ndjson({q}));

    SUBCASE("recursive scaffold scores 1.0") {
        spit(tmp.path / "rec.mock", dolores::testing::coe_recursive_mock());
        spit(tmp.path / "rec.ini", mock_config(tmp.path / "rec.mock"));
        fs::path out = tmp.path / "rec-out";
        CliResult res = run_cli(
            "bench --scaffold recursive --config " +
            (tmp.path / "rec.ini").string() + " --corpus " +
            (tmp.path / "articles").string() + " --questions " +
            (tmp.path / "questions.ndjson").string() + " --out " + out.string());
        REQUIRE(res.exit_code == 0);
        CHECK(res.output.find("mean score: 1.00 over 1 questions (1 finished)") !=
              std::string::npos);
        std::string ndjson = slurp(out / "scores.ndjson");
        CHECK(ndjson.find("\"mean_score\":1.0") != std::string::npos);
    }
    SUBCASE("react scaffold stops early and scores 0.0") {
        spit(tmp.path / "react.mock", dolores::testing::coe_react_mock());
        spit(tmp.path / "react.ini", mock_config(tmp.path / "react.mock"));
        CliResult res = run_cli(
            "bench --scaffold react --config " +
            (tmp.path / "react.ini").string() + " --corpus " +
            (tmp.path / "articles").string() + " --questions " +
            (tmp.path / "questions.ndjson").string());
        REQUIRE(res.exit_code == 0);
        CHECK(res.output.find("mean score: 0.00 over 1 questions (1 finished)") !=
              std::string::npos);
    }
    SUBCASE("unknown scaffold exits 2") {
        spit(tmp.path / "rec.mock", dolores::testing::coe_recursive_mock());
        spit(tmp.path / "rec.ini", mock_config(tmp.path / "rec.mock"));
        CliResult res = run_cli(
            "bench --scaffold tree --config " + (tmp.path / "rec.ini").string() +
            " --corpus " + (tmp.path / "articles").string() + " --questions " +
            (tmp.path / "questions.ndjson").string());
        CHECK(res.exit_code == 2);
    }
}

TEST_CASE("run with a corpus exposes retrieval hosts") {
    TempDir tmp("dolores-cli-corpus");
    save_corpus_dir(render_articles(dolores::testing::coe_world()),
                    tmp.path / "articles");
    spit(tmp.path / "lookup.mock",
         "[RULE label=\"root\"]\n"
         "One retrieval answers this.\n"
         "<repl>\n"
         "article = retrieve_article(\"Earle Coe\")\n"
         "FinalAnswer([line.split(\" is \")[1][:-1] for line in "
         "article.split(\"\\n\") if line.startswith(\"The occupation\")][0])\n"
         "</repl>\n"
         "[/RULE]\n");
    spit(tmp.path / "config.ini", mock_config(tmp.path / "lookup.mock"));
    CliResult res = run_cli(
        "run --config " + (tmp.path / "config.ini").string() +
        " --corpus " + (tmp.path / "articles").string() +
        " --task 'What is the occupation of Earle Coe?'");
    REQUIRE(res.exit_code == 0);
    CHECK(res.output.find("answer: petroleum engineer") != std::string::npos);
}
