#pragma once

// Structured traces for hierarchical agent runs: one event stream per run,
// dense per-thread sequence numbers, line-delimited JSON serialization.

#include <dolores/gateway.hpp>

#include <json.hpp>

#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace dolores {

inline constexpr int kTraceSchemaVersion = 1;

enum class TraceKind {
    ThreadStart,
    ModelTurn,
    Execution,
    Observation,
    ChildSpawn,
    BatchDispatch,
    FinalAnswer,
    Error,
    BudgetExhausted,
};

inline const char* trace_kind_name(TraceKind k) {
    switch (k) {
        case TraceKind::ThreadStart: return "thread-start";
        case TraceKind::ModelTurn: return "model-turn";
        case TraceKind::Execution: return "execution";
        case TraceKind::Observation: return "observation";
        case TraceKind::ChildSpawn: return "child-spawn";
        case TraceKind::BatchDispatch: return "batch-dispatch";
        case TraceKind::FinalAnswer: return "final-answer";
        case TraceKind::Error: return "error";
        case TraceKind::BudgetExhausted: return "budget-exhausted";
    }
    return "error";
}

inline TraceKind trace_kind_from_string(const std::string& s) {
    static const std::map<std::string, TraceKind> table = {
        {"thread-start", TraceKind::ThreadStart},
        {"model-turn", TraceKind::ModelTurn},
        {"execution", TraceKind::Execution},
        {"observation", TraceKind::Observation},
        {"child-spawn", TraceKind::ChildSpawn},
        {"batch-dispatch", TraceKind::BatchDispatch},
        {"final-answer", TraceKind::FinalAnswer},
        {"error", TraceKind::Error},
        {"budget-exhausted", TraceKind::BudgetExhausted},
    };
    auto it = table.find(s);
    if (it == table.end()) throw FormatError(0, "unknown trace kind " + s);
    return it->second;
}

struct TraceEvent {
    std::string thread_id;
    std::int64_t seq = 0;  // dense per thread, starting at 0
    TraceKind kind = TraceKind::Error;
    nlohmann::json payload;
    Usage usage;  // run-wide usage snapshot at emission time
    std::int64_t timestamp_ms = 0;
};

/// A thread's terminal event: final-answer, budget-exhausted, or an error
/// whose payload carries "terminal": true (non-terminal errors are feedback
/// notes such as malformed turns and failed children).
inline bool is_terminal_event(const TraceEvent& e) {
    switch (e.kind) {
        case TraceKind::FinalAnswer:
        case TraceKind::BudgetExhausted: return true;
        case TraceKind::Error: return e.payload.value("terminal", false);
        default: return false;
    }
}

class TraceSink {
public:
    using Clock = std::function<std::int64_t()>;

    explicit TraceSink(Clock clock = UsageLedger::default_clock)
        : clock_(std::move(clock)) {}

    void emit(const std::string& thread_id, TraceKind kind, nlohmann::json payload,
              Usage usage_snapshot) {
        std::lock_guard<std::mutex> lock(mu_);
        TraceEvent e;
        e.thread_id = thread_id;
        e.seq = next_seq_[thread_id]++;
        e.kind = kind;
        e.payload = std::move(payload);
        e.usage = usage_snapshot;
        e.timestamp_ms = clock_();
        events_.push_back(std::move(e));
    }

    std::vector<TraceEvent> events() const {
        std::lock_guard<std::mutex> lock(mu_);
        return events_;
    }

private:
    mutable std::mutex mu_;
    std::vector<TraceEvent> events_;
    std::map<std::string, std::int64_t> next_seq_;
    Clock clock_;
};

inline nlohmann::json trace_event_json(const TraceEvent& e,
                                       bool include_timestamp = true) {
    nlohmann::json j = {{"schema", kTraceSchemaVersion},
                        {"thread_id", e.thread_id},
                        {"seq", e.seq},
                        {"kind", trace_kind_name(e.kind)},
                        {"payload", e.payload},
                        {"usage",
                         {{"prompt_tokens", e.usage.prompt_tokens},
                          {"completion_tokens", e.usage.completion_tokens},
                          {"reasoning_tokens", e.usage.reasoning_tokens}}}};
    // the timestamp is the one nondeterministic field; everything else must be
    // byte-identical across reruns under a scripted backend
    if (include_timestamp) j["timestamp_ms"] = e.timestamp_ms;
    return j;
}

inline std::string trace_ndjson(const std::vector<TraceEvent>& events,
                                bool include_timestamps = true) {
    std::string out;
    for (const TraceEvent& e : events) {
        out += trace_event_json(e, include_timestamps).dump();
        out += '\n';
    }
    return out;
}

inline std::vector<TraceEvent> parse_trace_ndjson(const std::string& text) {
    std::vector<TraceEvent> events;
    size_t pos = 0;
    int lineno = 0;
    while (pos < text.size()) {
        size_t nl = text.find('\n', pos);
        std::string line =
            text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() : nl + 1;
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(lineno, std::string("bad trace line: ") + e.what());
        }
        TraceEvent e;
        try {
            e.thread_id = j.at("thread_id").get<std::string>();
            e.seq = j.at("seq").get<std::int64_t>();
            e.kind = trace_kind_from_string(j.at("kind").get<std::string>());
            e.payload = j.value("payload", nlohmann::json::object());
            if (j.contains("usage")) {
                e.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
                e.usage.completion_tokens = j["usage"].value("completion_tokens", 0);
                e.usage.reasoning_tokens = j["usage"].value("reasoning_tokens", 0);
            }
            e.timestamp_ms = j.value("timestamp_ms", std::int64_t(0));
        } catch (const nlohmann::json::exception& ex) {
            throw FormatError(lineno, std::string("bad trace record: ") + ex.what());
        }
        events.push_back(std::move(e));
    }
    return events;
}

}  // namespace dolores
