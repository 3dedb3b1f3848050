#pragma once

// Agent kernel: the recursive meta-reasoning loop. A thread alternates model
// turns and code execution; recursive calls spawn child threads with private
// environments; batched children run in parallel under a cap.

#include <dolores/examples.hpp>
#include <dolores/gateway.hpp>
#include <dolores/interp.hpp>
#include <dolores/parser.hpp>
#include <dolores/trace.hpp>
#include <dolores/value.hpp>

#include <atomic>
#include <exception>
#include <memory>
#include <string>
#include <thread>
#include <vector>

namespace dolores {

// ---------------------------------------------------------------------------
// Task specification and budgets

struct BoundVar {
    std::string name;
    Value value;
    std::string description;
};

struct TaskSpec {
    std::string task;
    std::vector<BoundVar> variables;
    std::string ns;
};

struct Budgets {
    int max_depth = 4;
    int max_turns_per_thread = 12;
    std::int64_t max_total_tokens = 10'000'000;  // completion tokens, run-wide
    int observation_char_budget = 4000;
    int max_parallel_children = 8;
};

struct KernelConfig {
    Budgets budgets;
    PromptMode prompt_mode = PromptMode::Examples;
    std::string default_namespace;  // empty: the library's first namespace
    std::string principles_text;    // required for PromptMode::Principles
    int malformed_turn_retries = 2;
    int max_new_tokens = 4096;
    TraceSink::Clock clock = UsageLedger::default_clock;
};

enum class ThreadStatus { Running, Finished, Failed, BudgetExhausted };

inline const char* thread_status_name(ThreadStatus s) {
    switch (s) {
        case ThreadStatus::Running: return "running";
        case ThreadStatus::Finished: return "finished";
        case ThreadStatus::Failed: return "failed";
        case ThreadStatus::BudgetExhausted: return "budget-exhausted";
    }
    return "failed";
}

struct RunResult {
    Value answer;  // none unless status == Finished
    ThreadStatus status = ThreadStatus::Failed;
    std::vector<TraceEvent> trace;
    UsageReport usage;
};

// ---------------------------------------------------------------------------
// Turn parsing

struct MalformedTurn : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParsedTurn {
    std::string thought;
    std::string code;
    int discarded_blocks = 0;  // extra code blocks after the first
};

/// Thought = text before the first `<repl>` line; code = block content up to
/// the matching `</repl>` line (or end of text when the backend's stop
/// sequence removed the close marker). Later blocks are discarded and noted.
inline ParsedTurn parse_turn(const std::string& model_text) {
    std::vector<std::string> lines;
    size_t pos = 0;
    while (pos <= model_text.size()) {
        size_t nl = model_text.find('\n', pos);
        if (nl == std::string::npos) {
            lines.push_back(model_text.substr(pos));
            break;
        }
        lines.push_back(model_text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    auto stripped = [](std::string s) {
        size_t a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return std::string();
        size_t b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    };

    ParsedTurn turn;
    size_t i = 0;
    std::string thought;
    for (; i < lines.size() && stripped(lines[i]) != kCodeOpen; ++i) {
        if (!thought.empty()) thought += '\n';
        thought += lines[i];
    }
    if (i == lines.size())
        throw MalformedTurn("no code block: expected a line " + std::string(kCodeOpen));
    turn.thought = stripped(thought);
    ++i;
    std::string code;
    for (; i < lines.size() && stripped(lines[i]) != kCodeClose; ++i) {
        if (!code.empty()) code += '\n';
        code += lines[i];
    }
    turn.code = code;
    for (; i < lines.size(); ++i)
        if (stripped(lines[i]) == kCodeOpen) ++turn.discarded_blocks;
    return turn;
}

// ---------------------------------------------------------------------------
// Kernel

class Kernel {
public:
    Kernel(const ExampleLibrary& library, KernelConfig config, Gateway& gateway,
           std::vector<HostFunction> tools = {})
        : library_(library), config_(std::move(config)), gateway_(gateway),
          tools_(std::move(tools)) {
        if (config_.prompt_mode == PromptMode::Principles &&
            config_.principles_text.empty())
            throw ConfigError("principles mode requires the principles text asset");
    }

    RunResult run(const TaskSpec& spec) {
        if (spec.task.empty()) throw ConfigError("task text is empty");
        RunCtx ctx{TraceSink(config_.clock)};
        ThreadState root;
        root.ctx = &ctx;
        root.id = "root";
        root.depth = 0;
        root.ns = resolve_namespace(spec.ns);
        run_thread(root, spec);
        RunResult result;
        result.answer = root.answer;
        result.status = root.status;
        result.trace = ctx.trace.events();
        result.usage = usage_report(gateway_.ledger());
        return result;
    }

private:
    struct RunCtx {
        TraceSink trace;
        std::atomic<std::int64_t> completion_tokens{0};
    };

    struct ThreadState {
        RunCtx* ctx = nullptr;
        std::string id;
        std::string parent_id;
        int depth = 0;
        std::string ns;
        EnvPtr env;
        std::vector<Message> messages;
        int child_counter = 0;
        std::vector<std::pair<std::string, TaskSpec>> batch;  // (child id, spec)
        ThreadStatus status = ThreadStatus::Running;
        Value answer;
    };

    std::string resolve_namespace(const std::string& ns) const {
        if (!ns.empty()) return ns;
        if (!config_.default_namespace.empty()) return config_.default_namespace;
        return library_.default_namespace();
    }

    Usage snapshot(const RunCtx& ctx) const {
        Usage u;
        u.completion_tokens = ctx.completion_tokens.load();
        return u;
    }

    void trace(ThreadState& st, TraceKind kind, nlohmann::json payload) {
        st.ctx->trace.emit(st.id, kind, std::move(payload), snapshot(*st.ctx));
    }

    // --- prompt assembly ---------------------------------------------------

    std::vector<HostFunction> prompt_hosts() const {
        std::vector<HostFunction> hs;
        auto add = [&](const char* name, const char* sig, const char* doc) {
            HostFunction h;
            h.name = name;
            h.signature = sig;
            h.doc = doc;
            hs.push_back(h);
        };
        add("llm", "llm(prompt, **vars) -> str",
            "Ask the language model one direct question; returns its raw text.");
        add("dolores", "dolores(task, namespace=..., **vars) -> value",
            "Spawn a recursive reasoning thread for the subtask and return its "
            "final answer.");
        add("add_task", "DoLoReS.add_task(task, namespace=..., **vars) -> handle",
            "Queue a subtask for parallel dispatch.");
        add("run_all", "DoLoReS.run_all() -> list",
            "Run every queued subtask in parallel; results come back in queue "
            "order.");
        add("FinalAnswer", "FinalAnswer(value)",
            "Finish this thread; value becomes the thread's answer.");
        for (const HostFunction& t : tools_) hs.push_back(t);
        return hs;
    }

    std::string system_prompt(const TaskSpec& spec, const std::string& ns) const {
        std::vector<VarDoc> vars;
        for (const BoundVar& v : spec.variables)
            vars.push_back({v.name, v.description, type_summary(v.value)});
        return render_system_prompt(library_.select(ns, config_.default_namespace),
                                    prompt_hosts(), vars, config_.prompt_mode,
                                    config_.principles_text);
    }

    // --- host registry per thread ------------------------------------------

    static std::string kwarg_string(Kwargs& kw, const std::string& key) {
        for (auto it = kw.begin(); it != kw.end(); ++it) {
            if (it->first == key) {
                if (!it->second.is_str())
                    throw RuntimeError(ErrKind::TypeMismatch,
                                       key + " must be a string");
                std::string v = it->second.as_str();
                kw.erase(it);
                return v;
            }
        }
        return "";
    }

    HostRegistry make_registry(ThreadState& st) {
        HostRegistry reg;

        HostFunction llm;
        llm.name = "llm";
        llm.effect = EffectClass::AssociativeCall;
        llm.min_args = 1;
        llm.max_args = 1;
        llm.allow_kwargs = true;
        llm.may_block = true;
        llm.fn = [this, &st](ValueList& a, Kwargs& kw, Span sp) {
            return host_llm(st, a, kw, sp);
        };
        reg.add(std::move(llm));

        HostFunction rec;
        rec.name = "dolores";
        rec.effect = EffectClass::RecursiveCall;
        rec.min_args = 1;
        rec.max_args = 1;
        rec.allow_kwargs = true;
        rec.may_block = true;
        rec.fn = [this, &st](ValueList& a, Kwargs& kw, Span sp) {
            return host_dolores(st, a, kw, sp);
        };
        reg.add(std::move(rec));

        HostFunction addt;
        addt.name = "add_task";
        addt.effect = EffectClass::RecursiveCall;
        addt.min_args = 1;
        addt.max_args = 1;
        addt.allow_kwargs = true;
        addt.fn = [this, &st](ValueList& a, Kwargs& kw, Span sp) {
            return host_add_task(st, a, kw, sp);
        };
        reg.add(std::move(addt));

        HostFunction runa;
        runa.name = "run_all";
        runa.effect = EffectClass::RecursiveCall;
        runa.min_args = 0;
        runa.max_args = 0;
        runa.may_block = true;
        runa.fn = [this, &st](ValueList&, Kwargs&, Span sp) {
            return host_run_all(st, sp);
        };
        reg.add(std::move(runa));

        HostFunction fin;
        fin.name = "FinalAnswer";
        fin.effect = EffectClass::Terminal;
        fin.min_args = 1;
        fin.max_args = 1;
        fin.fn = [](ValueList& a, Kwargs&, Span) -> Value {
            throw FinalAnswerSignal{a[0]};
        };
        reg.add(std::move(fin));

        for (const HostFunction& t : tools_) reg.add(t);

        reg.alias("DoLoReS", "dolores");
        reg.alias("DoLoReS.add_task", "add_task");
        reg.alias("DoLoReS.run_all", "run_all");
        return reg;
    }

    // --- hosts --------------------------------------------------------------

    Value host_llm(ThreadState& st, ValueList& a, Kwargs& kw, Span sp) {
        if (!a[0].is_str() || a[0].as_str().empty())
            throw RuntimeError(ErrKind::HostFailure, "llm: prompt must be a non-empty string",
                               sp);
        std::string user = a[0].as_str();
        for (const auto& [name, value] : kw)
            user += "\n\n" + name + " = " + repr_render(value);
        CompletionRequest req;
        req.messages = {{Role::System, "Answer the question directly and concisely."},
                        {Role::User, user}};
        req.max_new_tokens = config_.max_new_tokens;
        req.thread_label = st.id + ":llm";
        try {
            CompletionResult res = gateway_.complete(req);
            st.ctx->completion_tokens += res.usage.completion_tokens;
            return Value::str(res.text);
        } catch (const TransportError& e) {
            throw RuntimeError(ErrKind::HostFailure, std::string("llm: ") + e.what(), sp);
        } catch (const BackendRefusal& e) {
            throw RuntimeError(ErrKind::HostFailure, std::string("llm: ") + e.what(), sp);
        }
    }

    TaskSpec child_spec(ThreadState& st, ValueList& a, Kwargs& kw, Span sp,
                        std::string* ns_out) {
        if (!a[0].is_str() || a[0].as_str().empty())
            throw RuntimeError(ErrKind::HostFailure, "task text must be a non-empty string",
                               sp);
        if (st.depth + 1 > config_.budgets.max_depth)
            throw RuntimeError(ErrKind::HostFailure,
                               "recursion depth limit " +
                                   std::to_string(config_.budgets.max_depth) +
                                   " reached",
                               sp);
        std::string ns = kwarg_string(kw, "namespace");
        if (ns.empty()) ns = st.ns;  // inherit when not given
        *ns_out = ns;
        TaskSpec spec;
        spec.task = a[0].as_str();
        spec.ns = ns;
        for (const auto& [name, value] : kw) spec.variables.push_back({name, value, ""});
        return spec;
    }

    Value host_dolores(ThreadState& st, ValueList& a, Kwargs& kw, Span sp) {
        std::string ns;
        TaskSpec spec = child_spec(st, a, kw, sp, &ns);
        std::string child_id = st.id + "/" + std::to_string(++st.child_counter);
        trace(st, TraceKind::ChildSpawn,
              {{"child", child_id}, {"namespace", ns}, {"mode", "dolores"}});
        ThreadState child;
        child.ctx = st.ctx;
        child.id = child_id;
        child.parent_id = st.id;
        child.depth = st.depth + 1;
        child.ns = ns;
        run_thread(child, spec);  // blocks the caller until done
        if (child.status != ThreadStatus::Finished)
            throw RuntimeError(ErrKind::HostFailure,
                               "child " + child_id + " " +
                                   thread_status_name(child.status),
                               sp);
        return child.answer;
    }

    Value host_add_task(ThreadState& st, ValueList& a, Kwargs& kw, Span sp) {
        std::string ns;
        TaskSpec spec = child_spec(st, a, kw, sp, &ns);
        std::string child_id = st.id + "/" + std::to_string(++st.child_counter);
        trace(st, TraceKind::ChildSpawn,
              {{"child", child_id}, {"namespace", ns}, {"mode", "add_task"}});
        st.batch.emplace_back(child_id, std::move(spec));
        return Value::handle("task", std::uint64_t(st.child_counter));
    }

    Value host_run_all(ThreadState& st, Span sp) {
        if (st.batch.empty())
            throw RuntimeError(ErrKind::HostFailure, "empty batch", sp);
        std::vector<std::pair<std::string, TaskSpec>> tasks = std::move(st.batch);
        st.batch.clear();
        nlohmann::json children = nlohmann::json::array();
        for (const auto& [id, spec] : tasks) children.push_back(id);
        trace(st, TraceKind::BatchDispatch,
              {{"count", tasks.size()}, {"children", children}});

        std::vector<Value> results(tasks.size(), Value::none());
        std::atomic<size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mu;
        auto worker = [&] {
            for (size_t i = next.fetch_add(1); i < tasks.size();
                 i = next.fetch_add(1)) {
                try {
                    ThreadState child;
                    child.ctx = st.ctx;
                    child.id = tasks[i].first;
                    child.parent_id = st.id;
                    child.depth = st.depth + 1;
                    child.ns = tasks[i].second.ns;
                    run_thread(child, tasks[i].second);
                    if (child.status == ThreadStatus::Finished) {
                        results[i] = child.answer;
                    } else {
                        Value m = Value::map();
                        m.as_map().set(
                            Value::str("error"),
                            Value::str(child.status == ThreadStatus::BudgetExhausted
                                           ? err_kind_name(ErrKind::BudgetExceeded)
                                           : err_kind_name(ErrKind::HostFailure)));
                        m.as_map().set(Value::str("message"),
                                       Value::str("child " + child.id + " " +
                                                  thread_status_name(child.status)));
                        results[i] = m;
                    }
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mu);
                    if (!failure) failure = std::current_exception();
                    return;
                }
            }
        };
        int cap = std::min<int>(config_.budgets.max_parallel_children,
                                (int)tasks.size());
        if (cap <= 1) {
            worker();
        } else {
            // the cap counts only these workers: the blocked caller holds no slot
            std::vector<std::thread> pool;
            for (int w = 0; w < cap; ++w) pool.emplace_back(worker);
            for (std::thread& t : pool) t.join();
        }
        if (failure) std::rethrow_exception(failure);
        return Value::list(std::move(results));
    }

    // --- the loop ------------------------------------------------------------

    void run_thread(ThreadState& st, const TaskSpec& spec) {
        st.env = std::make_shared<Environment>();
        for (const BoundVar& v : spec.variables) st.env->set(v.name, v.value);
        trace(st, TraceKind::ThreadStart,
              {{"task", spec.task},
               {"namespace", st.ns},
               {"depth", st.depth},
               {"parent", st.parent_id}});
        HostRegistry registry = make_registry(st);
        st.messages = {{Role::System, system_prompt(spec, st.ns)},
                       {Role::User, spec.task}};

        int malformed_left = config_.malformed_turn_retries;
        for (int turn = 0; turn < config_.budgets.max_turns_per_thread; ++turn) {
            if (st.ctx->completion_tokens.load() >= config_.budgets.max_total_tokens) {
                st.status = ThreadStatus::BudgetExhausted;
                trace(st, TraceKind::BudgetExhausted, {{"reason", "max-total-tokens"}});
                return;
            }
            CompletionRequest req;
            req.messages = st.messages;
            req.max_new_tokens = config_.max_new_tokens;
            req.stop_sequences = {kCodeClose};
            req.thread_label = st.id;
            CompletionResult res = gateway_.complete(req);
            st.ctx->completion_tokens += res.usage.completion_tokens;
            trace(st, TraceKind::ModelTurn,
                  {{"text", res.text}, {"finish", finish_name(res.finish)}});
            st.messages.push_back({Role::Assistant, res.text});

            ParsedTurn parsed;
            try {
                parsed = parse_turn(res.text);
            } catch (const MalformedTurn& e) {
                if (malformed_left-- > 0) {
                    trace(st, TraceKind::Error,
                          {{"reason", "malformed-turn"},
                           {"message", e.what()},
                           {"terminal", false}});
                    st.messages.push_back(
                        {Role::User,
                         "Your reply had no code block. Answer with a short "
                         "thought followed by exactly one code block opened by a "
                         "line " +
                             std::string(kCodeOpen) + " and closed by a line " +
                             kCodeClose + "."});
                    continue;
                }
                st.status = ThreadStatus::Failed;
                trace(st, TraceKind::Error,
                      {{"reason", "malformed-turn"},
                       {"message", e.what()},
                       {"terminal", true}});
                return;
            }
            trace(st, TraceKind::Execution,
                  {{"code", parsed.code}, {"discarded_blocks", parsed.discarded_blocks}});

            EvalOutcome outcome;
            try {
                outcome = evaluate_source(parsed.code, st.env, registry, {},
                                          BlockOrigin::ModelTurn);
            } catch (const LexError& e) {
                outcome.error = EvalError{ErrKind::TypeMismatch,
                                          std::string("lex error: ") + e.what(),
                                          e.span};
            } catch (const SyntaxError& e) {
                outcome.error = EvalError{ErrKind::TypeMismatch,
                                          std::string("syntax error: ") + e.what(),
                                          e.span};
            }
            if (outcome.terminal) {
                st.status = ThreadStatus::Finished;
                st.answer = *outcome.terminal;
                trace(st, TraceKind::FinalAnswer, {{"answer", repr_render(st.answer)}});
                return;
            }
            std::string obs = render_observation(
                outcome, (size_t)config_.budgets.observation_char_budget);
            trace(st, TraceKind::Observation, {{"text", obs}});
            st.messages.push_back(
                {Role::User, std::string(kObservationPrefix) + "\n" + obs});
        }
        st.status = ThreadStatus::BudgetExhausted;
        trace(st, TraceKind::BudgetExhausted, {{"reason", "max-turns"}});
    }

    const ExampleLibrary& library_;
    KernelConfig config_;
    Gateway& gateway_;
    std::vector<HostFunction> tools_;
};

}  // namespace dolores
