#pragma once

// Comparison scaffolds and the benchmark driver. Three ways to answer a
// question over an article corpus:
//   recursive — the full Kernel with search/retrieve_article as extra tools
//   codeact   — one code-executing thread, no recursion hosts
//   react     — plain tool calls ("Action: {json}"), no interpreter at all
// plus a scorer that runs a question list through a scaffold and reports
// per-question and aggregate scores alongside token usage.

#include <dolores/corpus.hpp>
#include <dolores/kernel.hpp>
#include <dolores/scoring.hpp>
#include <dolores/world.hpp>

#include <json.hpp>

#include <sstream>
#include <string>
#include <vector>

namespace dolores {

// ---------------------------------------------------------------------------
// CodeAct: the kernel's single-thread loop without the recursion hosts.
// History accumulates in one context window; decomposition is impossible.

inline RunResult run_codeact_baseline(const ExampleLibrary& library,
                                      KernelConfig config, Gateway& gateway,
                                      std::vector<HostFunction> tools,
                                      const TaskSpec& spec) {
    if (spec.task.empty()) throw ConfigError("task text is empty");
    if (config.prompt_mode == PromptMode::Principles &&
        config.principles_text.empty())
        throw ConfigError("principles mode requires the principles text asset");

    RunResult result;
    TraceSink sink(config.clock);
    std::int64_t completion_tokens = 0;
    const std::string id = "root";
    auto trace = [&](TraceKind kind, nlohmann::json payload) {
        Usage u;
        u.completion_tokens = completion_tokens;
        sink.emit(id, kind, std::move(payload), u);
    };

    HostRegistry registry;
    HostFunction llm;
    llm.name = "llm";
    llm.effect = EffectClass::AssociativeCall;
    llm.min_args = 1;
    llm.max_args = 1;
    llm.allow_kwargs = true;
    llm.may_block = true;
    llm.fn = [&](ValueList& a, Kwargs& kw, Span sp) -> Value {
        if (!a[0].is_str() || a[0].as_str().empty())
            throw RuntimeError(ErrKind::HostFailure,
                               "llm: prompt must be a non-empty string", sp);
        std::string user = a[0].as_str();
        for (const auto& [name, value] : kw)
            user += "\n\n" + name + " = " + repr_render(value);
        CompletionRequest req;
        req.messages = {{Role::System, "Answer the question directly and concisely."},
                        {Role::User, user}};
        req.max_new_tokens = config.max_new_tokens;
        req.thread_label = id + ":llm";
        try {
            CompletionResult res = gateway.complete(req);
            completion_tokens += res.usage.completion_tokens;
            return Value::str(res.text);
        } catch (const TransportError& e) {
            throw RuntimeError(ErrKind::HostFailure, std::string("llm: ") + e.what(), sp);
        } catch (const BackendRefusal& e) {
            throw RuntimeError(ErrKind::HostFailure, std::string("llm: ") + e.what(), sp);
        }
    };
    registry.add(std::move(llm));
    HostFunction fin;
    fin.name = "FinalAnswer";
    fin.effect = EffectClass::Terminal;
    fin.min_args = 1;
    fin.max_args = 1;
    fin.fn = [](ValueList& a, Kwargs&, Span) -> Value {
        throw FinalAnswerSignal{a[0]};
    };
    registry.add(std::move(fin));
    for (const HostFunction& t : tools) registry.add(t);

    std::vector<HostFunction> prompt_hosts;
    for (const char* name : {"llm", "FinalAnswer"}) {
        const HostFunction* h = registry.find(name);
        HostFunction doc = *h;
        if (doc.signature.empty())
            doc.signature = std::string(name) + "(...)";
        prompt_hosts.push_back(doc);
    }
    prompt_hosts[0].signature = "llm(prompt, **vars) -> str";
    prompt_hosts[0].doc =
        "Ask the language model one direct question; returns its raw text.";
    prompt_hosts[1].signature = "FinalAnswer(value)";
    prompt_hosts[1].doc = "Finish the task; value becomes the answer.";
    for (const HostFunction& t : tools) prompt_hosts.push_back(t);

    std::vector<VarDoc> vars;
    for (const BoundVar& v : spec.variables)
        vars.push_back({v.name, v.description, type_summary(v.value)});
    std::string ns = !spec.ns.empty() ? spec.ns
                     : !config.default_namespace.empty()
                         ? config.default_namespace
                         : library.default_namespace();
    std::string system = render_system_prompt(
        library.select(ns, config.default_namespace), prompt_hosts, vars,
        config.prompt_mode, config.principles_text);

    EnvPtr env = std::make_shared<Environment>();
    for (const BoundVar& v : spec.variables) env->set(v.name, v.value);
    std::vector<Message> messages = {{Role::System, system},
                                     {Role::User, spec.task}};
    trace(TraceKind::ThreadStart,
          {{"task", spec.task}, {"namespace", ns}, {"depth", 0}, {"parent", ""}});

    int malformed_left = config.malformed_turn_retries;
    for (int turn = 0; turn < config.budgets.max_turns_per_thread; ++turn) {
        if (completion_tokens >= config.budgets.max_total_tokens) {
            result.status = ThreadStatus::BudgetExhausted;
            trace(TraceKind::BudgetExhausted, {{"reason", "max-total-tokens"}});
            result.trace = sink.events();
            result.usage = usage_report(gateway.ledger());
            return result;
        }
        CompletionRequest req;
        req.messages = messages;
        req.max_new_tokens = config.max_new_tokens;
        req.stop_sequences = {kCodeClose};
        req.thread_label = id;
        CompletionResult res = gateway.complete(req);
        completion_tokens += res.usage.completion_tokens;
        trace(TraceKind::ModelTurn,
              {{"text", res.text}, {"finish", finish_name(res.finish)}});
        messages.push_back({Role::Assistant, res.text});

        ParsedTurn parsed;
        try {
            parsed = parse_turn(res.text);
        } catch (const MalformedTurn& e) {
            if (malformed_left-- > 0) {
                trace(TraceKind::Error, {{"reason", "malformed-turn"},
                                         {"message", e.what()},
                                         {"terminal", false}});
                messages.push_back(
                    {Role::User,
                     "Your reply had no code block. Answer with a short thought "
                     "followed by exactly one code block opened by a line " +
                         std::string(kCodeOpen) + " and closed by a line " +
                         kCodeClose + "."});
                continue;
            }
            result.status = ThreadStatus::Failed;
            trace(TraceKind::Error, {{"reason", "malformed-turn"},
                                     {"message", e.what()},
                                     {"terminal", true}});
            result.trace = sink.events();
            result.usage = usage_report(gateway.ledger());
            return result;
        }
        trace(TraceKind::Execution,
              {{"code", parsed.code}, {"discarded_blocks", parsed.discarded_blocks}});

        EvalOutcome outcome;
        try {
            outcome = evaluate_source(parsed.code, env, registry, {},
                                      BlockOrigin::ModelTurn);
        } catch (const LexError& e) {
            outcome.error = EvalError{ErrKind::TypeMismatch,
                                      std::string("lex error: ") + e.what(), e.span};
        } catch (const SyntaxError& e) {
            outcome.error = EvalError{ErrKind::TypeMismatch,
                                      std::string("syntax error: ") + e.what(),
                                      e.span};
        }
        if (outcome.terminal) {
            result.status = ThreadStatus::Finished;
            result.answer = *outcome.terminal;
            trace(TraceKind::FinalAnswer, {{"answer", repr_render(result.answer)}});
            result.trace = sink.events();
            result.usage = usage_report(gateway.ledger());
            return result;
        }
        std::string obs = render_observation(
            outcome, (size_t)config.budgets.observation_char_budget);
        trace(TraceKind::Observation, {{"text", obs}});
        messages.push_back({Role::User, std::string(kObservationPrefix) + "\n" + obs});
    }
    result.status = ThreadStatus::BudgetExhausted;
    trace(TraceKind::BudgetExhausted, {{"reason", "max-turns"}});
    result.trace = sink.events();
    result.usage = usage_report(gateway.ledger());
    return result;
}

// ---------------------------------------------------------------------------
// ReAct: no interpreter. Each turn ends in a line
//
//   Action: {"tool": "search" | "retrieve_article" | "final_answer", ...}
//
// and the tool result is fed back verbatim as the observation.

struct ReactAction {
    std::string tool;
    nlohmann::json args;
};

struct MalformedAction : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline ReactAction parse_react_turn(const std::string& model_text) {
    size_t best = std::string::npos;
    size_t pos = 0;
    while (pos <= model_text.size()) {
        size_t nl = model_text.find('\n', pos);
        std::string line =
            model_text.substr(pos, nl == std::string::npos ? std::string::npos
                                                           : nl - pos);
        size_t a = line.find_first_not_of(" \t\r");
        if (a != std::string::npos && line.rfind("Action:", a) == a)
            best = pos + a + 7;
        if (nl == std::string::npos) break;
        pos = nl + 1;
    }
    if (best == std::string::npos)
        throw MalformedAction("no Action: line in the reply");
    // the JSON object may spill over following lines
    std::string rest = model_text.substr(best);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(rest, nullptr, true, true);
    } catch (const nlohmann::json::exception&) {
        size_t open = rest.find('{');
        size_t close = rest.rfind('}');
        if (open == std::string::npos || close == std::string::npos || close < open)
            throw MalformedAction("Action payload is not a JSON object");
        try {
            j = nlohmann::json::parse(rest.substr(open, close - open + 1));
        } catch (const nlohmann::json::exception& e) {
            throw MalformedAction(std::string("Action payload is not valid JSON: ") +
                                  e.what());
        }
    }
    if (!j.is_object() || !j.contains("tool") || !j["tool"].is_string())
        throw MalformedAction("Action object lacks a string \"tool\" field");
    ReactAction action;
    action.tool = j["tool"].get<std::string>();
    j.erase("tool");
    action.args = std::move(j);
    return action;
}

inline std::string react_system_prompt() {
    return
        "You answer questions about a wiki of people by calling tools.\n"
        "Each reply must end with exactly one line of the form\n"
        "Action: {\"tool\": \"...\", ...}\n"
        "Tools:\n"
        "  {\"tool\": \"search\", \"query\": \"...\", \"k\": 5} — rank articles "
        "for a query.\n"
        "  {\"tool\": \"retrieve_article\", \"title\": \"...\"} — fetch one "
        "article by exact title.\n"
        "  {\"tool\": \"final_answer\", \"answer\": \"...\" } — finish; the "
        "answer may also be a JSON array of strings.\n"
        "Text before the Action line is your own reasoning.\n";
}

inline RunResult run_react_baseline(const KernelConfig& config, Gateway& gateway,
                                    const CorpusIndex& index,
                                    const TaskSpec& spec) {
    if (spec.task.empty()) throw ConfigError("task text is empty");
    RunResult result;
    TraceSink sink(config.clock);
    std::int64_t completion_tokens = 0;
    const std::string id = "root";
    auto trace = [&](TraceKind kind, nlohmann::json payload) {
        Usage u;
        u.completion_tokens = completion_tokens;
        sink.emit(id, kind, std::move(payload), u);
    };
    auto finish = [&](ThreadStatus status) {
        result.status = status;
        result.trace = sink.events();
        result.usage = usage_report(gateway.ledger());
        return result;
    };

    std::vector<Message> messages = {{Role::System, react_system_prompt()},
                                     {Role::User, spec.task}};
    trace(TraceKind::ThreadStart,
          {{"task", spec.task}, {"namespace", "react"}, {"depth", 0}, {"parent", ""}});

    int malformed_left = config.malformed_turn_retries;
    for (int turn = 0; turn < config.budgets.max_turns_per_thread; ++turn) {
        if (completion_tokens >= config.budgets.max_total_tokens) {
            trace(TraceKind::BudgetExhausted, {{"reason", "max-total-tokens"}});
            return finish(ThreadStatus::BudgetExhausted);
        }
        CompletionRequest req;
        req.messages = messages;
        req.max_new_tokens = config.max_new_tokens;
        req.thread_label = id;
        CompletionResult res = gateway.complete(req);
        completion_tokens += res.usage.completion_tokens;
        trace(TraceKind::ModelTurn,
              {{"text", res.text}, {"finish", finish_name(res.finish)}});
        messages.push_back({Role::Assistant, res.text});

        ReactAction action;
        try {
            action = parse_react_turn(res.text);
        } catch (const MalformedAction& e) {
            if (malformed_left-- > 0) {
                trace(TraceKind::Error, {{"reason", "malformed-turn"},
                                         {"message", e.what()},
                                         {"terminal", false}});
                messages.push_back(
                    {Role::User,
                     "Your reply had no valid Action line. End with exactly one "
                     "line: Action: {\"tool\": ..., ...}"});
                continue;
            }
            trace(TraceKind::Error, {{"reason", "malformed-turn"},
                                     {"message", e.what()},
                                     {"terminal", true}});
            return finish(ThreadStatus::Failed);
        }
        trace(TraceKind::Execution,
              {{"tool", action.tool}, {"args", action.args}});

        if (action.tool == "final_answer") {
            const nlohmann::json answer = action.args.value("answer", nlohmann::json());
            Value v;
            if (answer.is_array()) {
                ValueList items;
                for (const auto& el : answer)
                    items.push_back(Value::str(
                        el.is_string() ? el.get<std::string>() : el.dump()));
                v = Value::list(std::move(items));
            } else if (answer.is_string()) {
                v = Value::str(answer.get<std::string>());
            } else if (answer.is_number()) {
                v = Value::str(answer.dump());
            } else {
                v = Value::str("");
            }
            result.answer = v;
            trace(TraceKind::FinalAnswer, {{"answer", repr_render(v)}});
            return finish(ThreadStatus::Finished);
        }

        std::string obs;
        if (action.tool == "search") {
            std::string query = action.args.value("query", "");
            int k = action.args.value("k", 5);
            auto hits = search(index, query, k);
            if (hits.empty()) {
                obs = "no results";
            } else {
                for (size_t i = 0; i < hits.size(); ++i) {
                    if (i) obs += "\n";
                    obs += render_hit(hits[i], (int)i + 1);
                }
            }
        } else if (action.tool == "retrieve_article") {
            std::string title = action.args.value("title", "");
            try {
                obs = retrieve_article(index, title).body;
            } catch (const NotFound& e) {
                obs = std::string("error: ") + e.what();
            }
        } else {
            obs = "error: unknown tool \"" + action.tool + "\"";
        }
        if (obs.size() > (size_t)config.budgets.observation_char_budget)
            obs = obs.substr(0, (size_t)config.budgets.observation_char_budget) +
                  "\n[truncated]";
        trace(TraceKind::Observation, {{"text", obs}});
        messages.push_back({Role::User, "Observation:\n" + obs});
    }
    trace(TraceKind::BudgetExhausted, {{"reason", "max-turns"}});
    return finish(ThreadStatus::BudgetExhausted);
}

// ---------------------------------------------------------------------------
// Scoring an answer value against a question

inline std::set<std::string> answer_as_set(const Value& v) {
    std::set<std::string> out;
    if (v.is_list()) {
        for (const Value& el : v.as_list())
            out.insert(el.is_str() ? el.as_str() : str_render(el));
    } else if (v.is_str()) {
        if (!v.as_str().empty()) out.insert(v.as_str());
    } else if (!v.is_none()) {
        out.insert(str_render(v));
    }
    return out;
}

inline double score_answer(const QuestionSpec& question, const Value& answer) {
    switch (question.metric) {
        case Metric::SetF1:
            return score_set_f1(answer_as_set(answer), question.gold);
        case Metric::TokenF1: {
            std::string text =
                answer.is_str() ? answer.as_str() : str_render(answer);
            double best = 0.0;
            for (const std::string& g : question.gold)
                best = std::max(best, score_token_f1(text, g));
            return best;
        }
        case Metric::RelaxedNumeric: {
            std::string text =
                answer.is_str() ? answer.as_str() : str_render(answer);
            for (const std::string& g : question.gold) {
                std::optional<double> gv = parse_number(g);
                if (gv && score_relaxed_numeric(text, *gv)) return 1.0;
            }
            return 0.0;
        }
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Benchmark driver

enum class Scaffold { Recursive, React, CodeAct };

inline const char* scaffold_name(Scaffold s) {
    switch (s) {
        case Scaffold::Recursive: return "recursive";
        case Scaffold::React: return "react";
        case Scaffold::CodeAct: return "codeact";
    }
    return "recursive";
}

inline Scaffold scaffold_from_string(const std::string& s) {
    if (s == "recursive") return Scaffold::Recursive;
    if (s == "react") return Scaffold::React;
    if (s == "codeact") return Scaffold::CodeAct;
    throw ConfigError("unknown scaffold " + s +
                      " (expected recursive | react | codeact)");
}

struct QuestionScore {
    std::string surface;
    double score = 0.0;
    std::string status;       // finished | failed | budget-exhausted | error
    std::string answer_text;  // rendered answer, empty unless finished
};

struct ScoreReport {
    Scaffold scaffold = Scaffold::Recursive;
    std::vector<QuestionScore> per_question;
    double mean_score = 0.0;
    int finished = 0;
    UsageReport usage;
};

/// A benchmark never aborts: a question whose run throws or fails simply
/// scores zero with its status recorded.
inline ScoreReport benchmark(Scaffold scaffold, const CorpusIndex& index,
                             const std::vector<QuestionSpec>& questions,
                             const ExampleLibrary& library,
                             const KernelConfig& config, Gateway& gateway) {
    ScoreReport report;
    report.scaffold = scaffold;
    std::vector<HostFunction> tools = {make_search_host(index),
                                       make_retrieve_host(index)};
    for (const QuestionSpec& q : questions) {
        TaskSpec spec;
        spec.task = q.surface +
                    (q.metric == Metric::SetF1
                         ? "\nAnswer with the list of matching names."
                         : "\nAnswer with the value only.");
        QuestionScore qs;
        qs.surface = q.surface;
        try {
            RunResult run;
            switch (scaffold) {
                case Scaffold::Recursive: {
                    Kernel kernel(library, config, gateway, tools);
                    run = kernel.run(spec);
                    break;
                }
                case Scaffold::CodeAct:
                    run = run_codeact_baseline(library, config, gateway, tools,
                                               spec);
                    break;
                case Scaffold::React:
                    run = run_react_baseline(config, gateway, index, spec);
                    break;
            }
            qs.status = thread_status_name(run.status);
            if (run.status == ThreadStatus::Finished) {
                qs.score = score_answer(q, run.answer);
                qs.answer_text = str_render(run.answer);
                ++report.finished;
            }
        } catch (const std::exception& e) {
            qs.status = std::string("error: ") + e.what();
        }
        report.per_question.push_back(std::move(qs));
    }
    double sum = 0.0;
    for (const QuestionScore& qs : report.per_question) sum += qs.score;
    report.mean_score =
        report.per_question.empty() ? 0.0 : sum / double(report.per_question.size());
    report.usage = usage_report(gateway.ledger());
    return report;
}

inline std::string score_report_ndjson(const ScoreReport& report) {
    std::string out;
    for (const QuestionScore& qs : report.per_question) {
        nlohmann::json j = {{"scaffold", scaffold_name(report.scaffold)},
                            {"surface", qs.surface},
                            {"score", qs.score},
                            {"status", qs.status},
                            {"answer", qs.answer_text}};
        out += j.dump();
        out += '\n';
    }
    nlohmann::json summary = {
        {"scaffold", scaffold_name(report.scaffold)},
        {"questions", report.per_question.size()},
        {"finished", report.finished},
        {"mean_score", report.mean_score},
        {"completion_tokens", report.usage.grand_total.completion_tokens},
        {"threads", report.usage.thread_count}};
    out += summary.dump();
    out += '\n';
    return out;
}

inline std::string render_score_report(const ScoreReport& report) {
    std::ostringstream out;
    out << "scaffold: " << scaffold_name(report.scaffold) << "\n";
    for (size_t i = 0; i < report.per_question.size(); ++i) {
        const QuestionScore& qs = report.per_question[i];
        out << "  [" << (i + 1) << "] " << two_decimals(qs.score) << "  "
            << qs.status << "  " << qs.surface << "\n";
    }
    out << "mean score: " << two_decimals(report.mean_score) << " over "
        << report.per_question.size() << " questions (" << report.finished
        << " finished)\n";
    out << "completion tokens: " << report.usage.grand_total.completion_tokens
        << " across " << report.usage.thread_count << " thread labels\n";
    return out.str();
}

}  // namespace dolores
