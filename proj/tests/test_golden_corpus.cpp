// Golden suite: the decomposition code blocks bundled with the project
// (volleyball, article lookup, episode counting) must parse, and with
// observation-seeded variables and scripted hosts must reproduce the
// recorded observation text.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <dolores/interp.hpp>

#include <map>

using namespace dolores;

namespace {

std::string normalize_ws(const std::string& s) {
    std::string out;
    bool in_ws = true;  // also trims leading whitespace
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            if (!in_ws) out += ' ';
            in_ws = true;
        } else {
            out += c;
            in_ws = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

HostFunction simple_host(std::string name, EffectClass effect,
                         std::function<Value(ValueList&, Kwargs&)> fn) {
    HostFunction h;
    h.name = std::move(name);
    h.effect = effect;
    h.allow_kwargs = true;
    h.fn = [fn](ValueList& a, Kwargs& kw, Span) { return fn(a, kw); };
    return h;
}

struct GoldenFixture {
    HostRegistry hosts;
    EnvPtr env = std::make_shared<Environment>();

    GoldenFixture() {
        hosts.add(simple_host("llm", EffectClass::AssociativeCall,
                              [this](ValueList& a, Kwargs&) {
                                  return scripted("llm", a[0].as_str());
                              }));
        hosts.add(simple_host("dolores", EffectClass::RecursiveCall,
                              [this](ValueList& a, Kwargs&) {
                                  return scripted("dolores", a[0].as_str());
                              }));
        hosts.add(simple_host("search", EffectClass::ToolCall,
                              [this](ValueList& a, Kwargs&) {
                                  return scripted("search", a[0].as_str());
                              }));
        hosts.add(simple_host("retrieve_article", EffectClass::ToolCall,
                              [this](ValueList& a, Kwargs&) {
                                  return scripted("retrieve_article", a[0].as_str());
                              }));
        hosts.add(simple_host("add_task", EffectClass::RecursiveCall,
                              [this](ValueList&, Kwargs&) {
                                  return Value::handle("task", next_handle++);
                              }));
        hosts.add(simple_host("run_all", EffectClass::RecursiveCall,
                              [this](ValueList&, Kwargs&) { return batch_results; }));
        HostFunction fa;
        fa.name = "FinalAnswer";
        fa.effect = EffectClass::Terminal;
        fa.min_args = 1;
        fa.max_args = 1;
        fa.fn = [](ValueList& a, Kwargs&, Span) -> Value {
            throw FinalAnswerSignal{a[0]};
        };
        hosts.add(std::move(fa));
        hosts.alias("DoLoReS", "dolores");
        hosts.alias("DoLoReS.add_task", "add_task");
        hosts.alias("DoLoReS.run_all", "run_all");
    }

    Value scripted(const std::string& host, const std::string& prompt) {
        for (const auto& [needle, reply] : script) {
            if (prompt.find(needle) != std::string::npos) return reply;
        }
        FAIL("no scripted reply for " << host << " prompt: " << prompt);
        return Value::none();
    }

    std::string observe(const std::string& src) {
        EvalOutcome out = evaluate_source(src, env, hosts);
        if (out.error) FAIL("eval error: " << out.error->message);
        return render_observation(out, 4000);
    }

    std::vector<std::pair<std::string, Value>> script;
    Value batch_results = Value::none();
    std::uint64_t next_handle = 1;
};

}  // namespace

TEST_CASE("volleyball decomposition blocks") {
    GoldenFixture fx;
    fx.script = {
        {"City by the Bay", Value::str("San Francisco")},
        {"List all volleyball courts",
         Value::list({Value::str("East Beach Volleyball Courts"),
                      Value::str("Crissy Field Beach"), Value::str("Marina Green Courts"),
                      Value::str("South End Zone Courts")})},
        {"match scores for", Value::list({Value::str("3-2"), Value::str("3-0")})},
        {"went to a tie-break", Value::integer(1)},
    };

    std::string obs1 = fx.observe(
        "city = llm(\"What city is known as the 'City by the Bay'? Return just the city "
        "name.\")\n"
        "print(city)\n");
    CHECK(normalize_ws(obs1) == "San Francisco");

    std::string obs2 = fx.observe(
        "courts = dolores(\n"
        "    f\"List all volleyball courts located in {city}. Return a Python list of "
        "strings.\",\n"
        "    namespace=\"lookup\"\n"
        ")\n"
        "print(courts)\n");
    CHECK(normalize_ws(obs2) ==
          "['East Beach Volleyball Courts', 'Crissy Field Beach', 'Marina Green Courts', "
          "'South End Zone Courts']");

    // The recorded loop block drops the per-court counts on the floor
    // (nothing ever lands in tiebreak_counts), so it cannot reproduce its
    // observation; it must still parse and run clean.
    std::string obs3 = fx.observe(
        "tiebreak_counts = {}\n"
        "for court in courts:\n"
        "    scores = dolores(\n"
        "        f\"List all past tournament match scores for {court} in {city}.\"\n"
        "        f\" Return a list of match result strings (e.g. '3-2', '3-0').\",\n"
        "        namespace=\"lookup\"\n"
        "    )\n"
        "    dolores(\n"
        "        \"How many of these volleyball match scores went to a tie-break?\",\n"
        "        scores=scores,\n"
        "        namespace=\"formal\"\n"
        "    )\n"
        "tiebreaks = dict(zip(courts, tiebreak_counts))\n"
        "print(tiebreaks)\n");
    CHECK(normalize_ws(obs3) == "{}");

    // final turn, seeded with the recorded observation map
    fx.env = std::make_shared<Environment>();
    Value m = Value::map();
    m.as_map().set(Value::str("East Beach"), Value::integer(14));
    m.as_map().set(Value::str("Crissy Field Beach"), Value::integer(8));
    m.as_map().set(Value::str("Marina Green Courts"), Value::integer(5));
    m.as_map().set(Value::str("South End Zone Courts"), Value::integer(11));
    fx.env->set("tiebreaks", m);
    EvalOutcome out =
        evaluate_source("FinalAnswer(max(tiebreaks, key=tiebreaks.get))", fx.env, fx.hosts);
    REQUIRE(out.terminal.has_value());
    CHECK(*out.terminal == Value::str("East Beach"));
}

TEST_CASE("lookup decomposition blocks") {
    GoldenFixture fx;
    const std::string results_text =
        "East Beach Volleyball Courts hosted the 2019 and 2022 CBVA Opens.\n"
        "  2022 Open final:   Team A def. Team B  3-2\n"
        "  2022 Open semi:    Team C def. Team D  3-0\n"
        "  2022 Open quarter: Team E def. Team F  3-1\n"
        "  2019 Open final:   Team G def. Team H  3-2  ...";
    fx.script = {
        {"Rephrase as a concise web search query",
         Value::str("East Beach Volleyball Courts San Francisco tournament results")},
        {"tournament results", Value::str(results_text)},
        {"extract every match result",
         Value::str("['3-2', '3-0', '3-1', '3-2', '3-1', '2-3', '3-0', '3-2']")},
    };

    std::string obs1 = fx.observe(
        "query = llm(\n"
        "    \"Rephrase as a concise web search query:\\n\"\n"
        "    \"Past tournament match results at East Beach Volleyball Courts San "
        "Francisco\"\n"
        ")\n"
        "results = search(query)\n"
        "print(results[:400])\n");
    CHECK(normalize_ws(obs1) == normalize_ws(results_text));

    std::string obs2 = fx.observe(
        "scores = llm(\n"
        "    \"From the text below extract every match result as a Python list of "
        "strings\"\n"
        "    \" in the format '3-0', '3-1', '3-2' (or '0-3', '1-3', '2-3' for losses).\"\n"
        "    \" Return only the list.\\n\\n\" + results\n"
        ")\n"
        "print(scores)\n");
    CHECK(normalize_ws(obs2) ==
          "['3-2', '3-0', '3-1', '3-2', '3-1', '2-3', '3-0', '3-2']");

    EvalOutcome out = evaluate_source("FinalAnswer(scores)", fx.env, fx.hosts);
    REQUIRE(out.terminal.has_value());
    CHECK(out.terminal->is_str());
}

TEST_CASE("formal decomposition blocks") {
    GoldenFixture fx;
    fx.env->set("scores",
                Value::list({Value::str("3-2"), Value::str("3-0"), Value::str("3-1"),
                             Value::str("3-2"), Value::str("2-3")}));

    CHECK(normalize_ws(fx.observe("print(scores[:5])")) ==
          "['3-2', '3-0', '3-1', '3-2', '2-3']");

    std::string obs = fx.observe(
        "count = sum(1 for s in scores if s in ('3-2', '2-3'))\n"
        "print(count)\n");
    CHECK(normalize_ws(obs) == "3");

    EvalOutcome out = evaluate_source("FinalAnswer(3)", fx.env, fx.hosts);
    REQUIRE(out.terminal.has_value());
    CHECK(*out.terminal == Value::integer(3));
}

TEST_CASE("two-hop script lookup blocks") {
    GoldenFixture fx;
    fx.script = {
        {"What script is", Value::str("Valtarian Glyphic Script")},
        {"Flames of Destiny",
         Value::list({Value::str("Flames of Destiny is a video game released in 2057. "
                                 "Among the scripts used are Valtarian Glyphic Script.")})},
    };

    std::string obs1 = fx.observe(
        "docs = search(\"Flames of Destiny\")\n"
        "script = llm(f\"What script is 'Flames of Destiny' written in? \"\n"
        "             f\"Return just the script name.\\n\\n\"\n"
        "             f\"{''.join(docs)}\")\n"
        "print(script)\n");
    CHECK(normalize_ws(obs1) == "Valtarian Glyphic Script");

    fx.script = {
        {"What is the opposite", Value::str("Valtaroscript")},
        {"Valtarian Glyphic Script",
         Value::list({Value::str("The opposite of the Valtarian Glyphic Script is "
                                 "Valtaroscript.")})},
    };
    std::string obs2 = fx.observe(
        "docs = search(\"Valtarian Glyphic Script\")\n"
        "opposite_script = llm(f\"What is the opposite of the Valtarian Glyphic \"\n"
        "                       f\"Script? Return just the script name.\\n\\n\"\n"
        "                       f\"{''.join(docs)}\")\n"
        "print(opposite_script)\n");
    CHECK(normalize_ws(obs2) == "Valtaroscript");

    EvalOutcome out = evaluate_source("FinalAnswer(\"Valtaroscript\")", fx.env, fx.hosts);
    REQUIRE(out.terminal.has_value());
    CHECK(*out.terminal == Value::str("Valtaroscript"));
}

TEST_CASE("family multi-hop lookup blocks") {
    GoldenFixture fx;
    fx.script = {
        {"0984-05-03", Value::str("(1) Earle Coe")},
        {"Earle Coe",
         Value::str("# Earle Coe\n## Family\nThe mother of Earle Coe is Alycia Coe.\n"
                    "The father of Earle Coe is Christoper Coe.\n"
                    "The son of Earle Coe is Reggie Coe.\n"
                    "The wife of Earle Coe is Christina Coe.\n## Attributes\n"
                    "The date of birth of Earle Coe is 0984-05-03.\n"
                    "The occupation of Earle Coe is petroleum engineer.")},
        {"Reggie Coe", Value::str("# Reggie Coe\n## Family\n"
                                  "The wife of Reggie Coe is Lissa Coe.")},
        {"Lissa Coe", Value::str("# Lissa Coe\n## Family\n"
                                 "The friend of Lissa Coe is Bobbie Luu.")},
    };

    std::string obs1 = fx.observe(
        "search_result = search(\"0984-05-03\")\n"
        "print(f\"Search result for DOB: {search_result}\")\n");
    CHECK(normalize_ws(obs1) == "Search result for DOB: (1) Earle Coe");

    std::string obs2 = fx.observe(
        "article = retrieve_article(\"Earle Coe\")\n"
        "print(f\"Earle Coe's article: {article}\")\n");
    CHECK(obs2.find("The son of Earle Coe is Reggie Coe.") != std::string::npos);

    std::string obs3 = fx.observe(
        "# No \"daughter-in-law\" field; check if son has a wife\n"
        "reggie_article = retrieve_article(\"Reggie Coe\")\n"
        "print(f\"Reggie Coe's article: {reggie_article}\")\n");
    CHECK(obs3.find("The wife of Reggie Coe is Lissa Coe.") != std::string::npos);

    std::string obs4 = fx.observe(
        "lissa_article = retrieve_article(\"Lissa Coe\")\n"
        "print(f\"Lissa Coe's article: {lissa_article}\")\n");
    CHECK(obs4.find("The friend of Lissa Coe is Bobbie Luu.") != std::string::npos);

    EvalOutcome out =
        evaluate_source("FinalAnswer([\"Bobbie Luu\"])", fx.env, fx.hosts);
    REQUIRE(out.terminal.has_value());
    CHECK(*out.terminal == Value::list({Value::str("Bobbie Luu")}));
}

TEST_CASE("episode counting blocks") {
    GoldenFixture fx;
    // 8 episodes: per-episode (total, fours) tuples summing to (1188, 26)
    const long long totals[8] = {150, 140, 160, 130, 155, 145, 158, 150};
    const long long fours[8] = {4, 3, 5, 2, 4, 3, 3, 2};
    ValueList eps;
    for (int i = 0; i < 8; ++i) eps.push_back(Value::str("episode " + std::to_string(i)));
    fx.script = {{"Extract all episodes", Value::list(eps)}};
    ValueList tuples;
    for (int i = 0; i < 8; ++i)
        tuples.push_back(Value::tuple({Value::integer(totals[i]), Value::integer(fours[i])}));
    fx.batch_results = Value::list(std::move(tuples));
    fx.env->set("document", Value::str("unused in the scripted run"));

    std::string obs1 = fx.observe(
        "episodes = DoLoReS(\n"
        "    \"\"\"Extract all episodes from the DnD game text in `document`.\n"
        "    Each episode is delimited by '[START OF EPISODE]' and\n"
        "    '[END OF EPISODE]'. Return a list of strings.\"\"\",\n"
        "    document=document, namespace=\"splitting episodes\")\n"
        "print(f\"Found {len(episodes)} episodes.\")\n");
    CHECK(normalize_ws(obs1) == "Found 8 episodes.");

    std::string obs2 = fx.observe(
        "for ep in episodes:\n"
        "    DoLoReS.add_task(\n"
        "        \"\"\"In the given DnD episode text, count the total number\n"
        "        of dice rolls and how many resulted in a value of 4.\n"
        "        Return a tuple (total_rolls, fours_count) as integers.\"\"\",\n"
        "        episode=Var(ep, \"DnD episode text\"),\n"
        "        namespace=\"episode qa\")\n"
        "results = DoLoReS.run_all()\n"
        "\n"
        "total_rolls = sum(r[0] for r in results)\n"
        "total_fours = sum(r[1] for r in results)\n"
        "percentage = round((total_fours / total_rolls) * 100)\n"
        "print(f\"Total rolls: {total_rolls}, Total fours: {total_fours}, \"\n"
        "      f\"Percentage: {percentage}%\")\n");
    CHECK(normalize_ws(obs2) == "Total rolls: 1188, Total fours: 26, Percentage: 2%");

    EvalOutcome out = evaluate_source("FinalAnswer(\"2\")", fx.env, fx.hosts);
    REQUIRE(out.terminal.has_value());
    CHECK(*out.terminal == Value::str("2"));
}
