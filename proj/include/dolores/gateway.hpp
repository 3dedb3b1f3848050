#pragma once

// LLM gateway: one completion interface over an OpenAI-compatible HTTP
// endpoint and a deterministic scripted mock, plus the token-usage ledger.

#include <dolores/errors.hpp>

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace dolores {

// ---------------------------------------------------------------------------
// Messages and results

enum class Role { System, User, Assistant };

inline const char* role_name(Role r) {
    switch (r) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

struct Message {
    Role role = Role::User;
    std::string content;
};

struct CompletionRequest {
    std::vector<Message> messages;  // first must be role=system
    double temperature = 0.0;
    int max_new_tokens = 4096;
    std::vector<std::string> stop_sequences;
    std::string thread_label;
};

struct Usage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::int64_t reasoning_tokens = 0;

    Usage& operator+=(const Usage& o) {
        prompt_tokens += o.prompt_tokens;
        completion_tokens += o.completion_tokens;
        reasoning_tokens += o.reasoning_tokens;
        return *this;
    }
};

enum class Finish { Stop, Length, Error };

inline const char* finish_name(Finish f) {
    switch (f) {
        case Finish::Stop: return "stop";
        case Finish::Length: return "length";
        case Finish::Error: return "error";
    }
    return "error";
}

struct CompletionResult {
    std::string text;
    Usage usage;
    Finish finish = Finish::Stop;
};

// ---------------------------------------------------------------------------
// Errors

struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BackendRefusal : std::runtime_error {
    int status;
    BackendRefusal(int s, std::string msg)
        : std::runtime_error(std::move(msg)), status(s) {}
};

/// No mock rule matched — always a test/script bug, never model misbehavior.
struct MockMiss : std::runtime_error {
    MockMiss(const std::string& label, int turn, const std::string& last_user)
        : std::runtime_error("no mock rule for thread \"" + label + "\" turn " +
                             std::to_string(turn) + " (last user message: " +
                             last_user.substr(0, 120) + ")") {}
};

// ---------------------------------------------------------------------------
// Usage ledger

struct LedgerEntry {
    std::string thread_label;
    Usage usage;
    std::int64_t timestamp_ms = 0;
};

class UsageLedger {
public:
    using Clock = std::function<std::int64_t()>;

    explicit UsageLedger(Clock clock = default_clock) : clock_(std::move(clock)) {}

    void record(const std::string& thread_label, const Usage& usage) {
        std::lock_guard<std::mutex> lock(mu_);
        entries_.push_back({thread_label, usage, clock_()});
    }

    std::vector<LedgerEntry> entries() const {
        std::lock_guard<std::mutex> lock(mu_);
        return entries_;
    }

    /// One JSON object per entry, newline-delimited; field names fixed.
    std::string export_ndjson() const {
        std::string out;
        for (const LedgerEntry& e : entries()) {
            nlohmann::json j = {{"thread_label", e.thread_label},
                                {"prompt_tokens", e.usage.prompt_tokens},
                                {"completion_tokens", e.usage.completion_tokens},
                                {"reasoning_tokens", e.usage.reasoning_tokens},
                                {"timestamp_ms", e.timestamp_ms}};
            out += j.dump();
            out += '\n';
        }
        return out;
    }

    static std::int64_t default_clock() {
        using namespace std::chrono;
        return duration_cast<milliseconds>(system_clock::now().time_since_epoch())
            .count();
    }

private:
    mutable std::mutex mu_;
    std::vector<LedgerEntry> entries_;
    Clock clock_;
};

struct UsageReport {
    std::vector<std::pair<std::string, Usage>> per_thread;  // sorted by label
    Usage grand_total;
    std::int64_t thread_count = 0;
    double mean_completion_per_thread = 0.0;
    double mean_reasoning_per_thread = 0.0;
};

inline UsageReport usage_report(const UsageLedger& ledger) {
    UsageReport rep;
    std::map<std::string, Usage> by_thread;
    for (const LedgerEntry& e : ledger.entries()) {
        by_thread[e.thread_label] += e.usage;
        rep.grand_total += e.usage;
    }
    rep.thread_count = (std::int64_t)by_thread.size();
    for (auto& [label, usage] : by_thread) rep.per_thread.emplace_back(label, usage);
    if (rep.thread_count > 0) {
        rep.mean_completion_per_thread =
            double(rep.grand_total.completion_tokens) / double(rep.thread_count);
        rep.mean_reasoning_per_thread =
            double(rep.grand_total.reasoning_tokens) / double(rep.thread_count);
    }
    return rep;
}

inline std::string two_decimals(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

/// Human-readable table; token counts from the mock are word-count
/// approximations and the header says so.
inline std::string render_usage_table(const UsageReport& rep,
                                      bool approximate = false) {
    std::ostringstream out;
    out << "thread               prompt  completion  reasoning\n";
    for (const auto& [label, u] : rep.per_thread) {
        out << label;
        for (size_t i = label.size(); i < 21; ++i) out << ' ';
        out << u.prompt_tokens << "  " << u.completion_tokens << "  "
            << u.reasoning_tokens << "\n";
    }
    out << "total: prompt " << rep.grand_total.prompt_tokens << ", completion "
        << rep.grand_total.completion_tokens << ", reasoning "
        << rep.grand_total.reasoning_tokens << "\n";
    out << "threads: " << rep.thread_count << ", mean completion/thread "
        << two_decimals(rep.mean_completion_per_thread) << ", mean reasoning/thread "
        << two_decimals(rep.mean_reasoning_per_thread) << "\n";
    if (approximate) out << "(token counts approximated by word count)\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Backend interface

class Backend {
public:
    virtual ~Backend() = default;
    virtual CompletionResult complete(const CompletionRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// Scripted mock backend
//
// Rule file format (documented extension .mock):
//
//   [RULE label="root/*" turn=2 contains="tie-break"]
//   ...response text...
//   [/RULE]
//
// `label` is a glob over the thread label ('*' matches any run), `turn` and
// `contains` are optional. First matching rule wins; a miss is MockMiss.

struct MockRule {
    std::string label_pattern = "*";
    int turn = -1;  // 1-based per-label turn index; -1 matches any
    std::string contains;  // substring of the last user message; empty = any
    std::string response;
};

inline bool glob_match(const std::string& pattern, const std::string& text) {
    // classic two-pointer '*' glob, no character classes
    size_t p = 0, t = 0, star = std::string::npos, mark = 0;
    while (t < text.size()) {
        if (p < pattern.size() && (pattern[p] == text[t] || pattern[p] == '?')) {
            ++p;
            ++t;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = t;
        } else if (star != std::string::npos) {
            p = star + 1;
            t = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

/// Whitespace-delimited word count: the mock's token approximation.
inline std::int64_t approx_tokens(const std::string& text) {
    std::int64_t n = 0;
    bool in_word = false;
    for (char c : text) {
        bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r';
        if (!ws && !in_word) ++n;
        in_word = !ws;
    }
    return n;
}

/// First `limit` whitespace-delimited words of `text`.
inline std::string truncate_words(const std::string& text, std::int64_t limit) {
    std::int64_t n = 0;
    bool in_word = false;
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r';
        if (!ws && !in_word) {
            if (n == limit) {
                size_t end = text.find_last_not_of(" \t\n\r", i - 1);
                return text.substr(0, end == std::string::npos ? 0 : end + 1);
            }
            ++n;
        }
        in_word = !ws;
    }
    return text;
}

struct MockScript {
    std::vector<MockRule> rules;

    static MockScript parse(const std::string& document) {
        MockScript script;
        std::optional<MockRule> cur;
        std::string body;
        int lineno = 0;
        size_t pos = 0;
        while (pos < document.size()) {
            size_t nl = document.find('\n', pos);
            std::string line = document.substr(
                pos, nl == std::string::npos ? std::string::npos : nl - pos);
            pos = nl == std::string::npos ? document.size() : nl + 1;
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();

            if (line.rfind("[RULE", 0) == 0) {
                if (cur) throw FormatError(lineno, "nested [RULE]");
                if (line.back() != ']') throw FormatError(lineno, "malformed [RULE]");
                cur = MockRule{};
                body.clear();
                parse_attrs(line.substr(5, line.size() - 6), *cur, lineno);
            } else if (line == "[/RULE]") {
                if (!cur) throw FormatError(lineno, "[/RULE] without [RULE]");
                if (!body.empty() && body.back() == '\n') body.pop_back();
                cur->response = body;
                script.rules.push_back(std::move(*cur));
                cur.reset();
            } else if (cur) {
                body += line;
                body += '\n';
            } else if (line.find_first_not_of(" \t") != std::string::npos &&
                       line[line.find_first_not_of(" \t")] != '#') {
                throw FormatError(lineno, "content outside any [RULE]");
            }
        }
        if (cur) throw FormatError(lineno, "unterminated [RULE]");
        return script;
    }

private:
    static void parse_attrs(const std::string& attrs, MockRule& rule, int lineno) {
        size_t i = 0;
        auto skip_ws = [&] { while (i < attrs.size() && attrs[i] == ' ') ++i; };
        skip_ws();
        while (i < attrs.size()) {
            size_t eq = attrs.find('=', i);
            if (eq == std::string::npos)
                throw FormatError(lineno, "malformed [RULE] attribute");
            std::string key = attrs.substr(i, eq - i);
            i = eq + 1;
            std::string val;
            if (i < attrs.size() && attrs[i] == '"') {
                size_t close = attrs.find('"', i + 1);
                if (close == std::string::npos)
                    throw FormatError(lineno, "unterminated attribute string");
                val = attrs.substr(i + 1, close - i - 1);
                i = close + 1;
            } else {
                size_t end = attrs.find(' ', i);
                if (end == std::string::npos) end = attrs.size();
                val = attrs.substr(i, end - i);
                i = end;
            }
            if (key == "label") rule.label_pattern = val;
            else if (key == "turn") rule.turn = std::stoi(val);
            else if (key == "contains") rule.contains = val;
            else throw FormatError(lineno, "unknown [RULE] attribute " + key);
            skip_ws();
        }
    }
};

class MockBackend : public Backend {
public:
    explicit MockBackend(MockScript script) : script_(std::move(script)) {}

    CompletionResult complete(const CompletionRequest& request) override {
        std::lock_guard<std::mutex> lock(mu_);
        int turn = ++turns_[request.thread_label];
        std::string last_user;
        for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it)
            if (it->role == Role::User) {
                last_user = it->content;
                break;
            }
        for (const MockRule& rule : script_.rules) {
            if (!glob_match(rule.label_pattern, request.thread_label)) continue;
            if (rule.turn != -1 && rule.turn != turn) continue;
            if (!rule.contains.empty() &&
                last_user.find(rule.contains) == std::string::npos)
                continue;
            CompletionResult res;
            res.text = rule.response;
            res.finish = Finish::Stop;
            if (approx_tokens(res.text) > request.max_new_tokens) {
                res.text = truncate_words(res.text, request.max_new_tokens);
                res.finish = Finish::Length;
            }
            std::int64_t prompt = 0;
            for (const Message& m : request.messages) prompt += approx_tokens(m.content);
            res.usage.prompt_tokens = prompt;
            res.usage.completion_tokens = approx_tokens(res.text);
            res.usage.reasoning_tokens = 0;
            return res;
        }
        throw MockMiss(request.thread_label, turn, last_user);
    }

private:
    std::mutex mu_;
    MockScript script_;
    std::map<std::string, int> turns_;
};

// ---------------------------------------------------------------------------
// HTTP backend (OpenAI-compatible chat completions)

struct HttpBackendConfig {
    std::string base_url;     // e.g. http://localhost:8000
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string credential;   // bearer token; from the environment, never files
    int timeout_seconds = 120;
    // When the backend reports no reasoning usage, text between these
    // delimiters is counted instead (empty = feature off).
    std::string reasoning_open;
    std::string reasoning_close;
};

CompletionResult http_complete(const HttpBackendConfig& config,
                               const CompletionRequest& request);

class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {}

    CompletionResult complete(const CompletionRequest& request) override {
        return http_complete(config_, request);
    }

    const HttpBackendConfig& config() const { return config_; }

private:
    HttpBackendConfig config_;
};

inline nlohmann::json completion_request_json(const HttpBackendConfig& config,
                                              const CompletionRequest& request) {
    nlohmann::json messages = nlohmann::json::array();
    for (const Message& m : request.messages)
        messages.push_back({{"role", role_name(m.role)}, {"content", m.content}});
    nlohmann::json body = {{"model", config.model},
                           {"messages", messages},
                           {"temperature", request.temperature},
                           {"max_tokens", request.max_new_tokens}};
    if (!request.stop_sequences.empty()) body["stop"] = request.stop_sequences;
    return body;
}

inline CompletionResult parse_completion_response(const HttpBackendConfig& config,
                                                  const std::string& body) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("unparseable backend response: ") + e.what());
    }
    CompletionResult res;
    try {
        const auto& choice = j.at("choices").at(0);
        res.text = choice.at("message").at("content").get<std::string>();
        std::string finish = choice.value("finish_reason", "stop");
        res.finish = finish == "length" ? Finish::Length : Finish::Stop;
        if (j.contains("usage")) {
            const auto& u = j["usage"];
            res.usage.prompt_tokens = u.value("prompt_tokens", std::int64_t(0));
            res.usage.completion_tokens = u.value("completion_tokens", std::int64_t(0));
            if (u.contains("completion_tokens_details"))
                res.usage.reasoning_tokens = u["completion_tokens_details"].value(
                    "reasoning_tokens", std::int64_t(0));
        }
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("unexpected backend response shape: ") +
                             e.what());
    }
    if (res.usage.reasoning_tokens == 0 && !config.reasoning_open.empty()) {
        size_t open = res.text.find(config.reasoning_open);
        size_t close = res.text.find(config.reasoning_close);
        if (open != std::string::npos && close != std::string::npos && close > open)
            res.usage.reasoning_tokens = approx_tokens(res.text.substr(
                open + config.reasoning_open.size(),
                close - open - config.reasoning_open.size()));
    }
    if (res.usage.reasoning_tokens > res.usage.completion_tokens)
        res.usage.reasoning_tokens = res.usage.completion_tokens;
    return res;
}

// ---------------------------------------------------------------------------
// Gateway: retries + ledger recording around any backend

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};  // doubles per attempt
};

class Gateway {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    Gateway(Backend& backend, UsageLedger& ledger, RetryPolicy retry = {},
            Sleeper sleeper = default_sleeper)
        : backend_(backend), ledger_(ledger), retry_(retry),
          sleeper_(std::move(sleeper)) {}

    CompletionResult complete(const CompletionRequest& request) {
        std::chrono::milliseconds backoff = retry_.initial_backoff;
        for (int attempt = 1;; ++attempt) {
            try {
                CompletionResult res = backend_.complete(request);
                ledger_.record(request.thread_label, res.usage);
                return res;
            } catch (const TransportError&) {
                if (attempt >= retry_.attempts) throw;
                sleeper_(backoff);
                backoff *= 2;
            }
            // BackendRefusal and MockMiss propagate: not retryable
        }
    }

    UsageLedger& ledger() { return ledger_; }

    static void default_sleeper(std::chrono::milliseconds d);

private:
    Backend& backend_;
    UsageLedger& ledger_;
    RetryPolicy retry_;
    Sleeper sleeper_;
};

}  // namespace dolores

// http_complete and the real sleeper live behind a macro so tests that never
// touch the network do not pay for compiling httplib.
#if defined(DOLORES_ENABLE_HTTP)
#include <httplib.h>

namespace dolores {

inline CompletionResult http_complete(const HttpBackendConfig& config,
                                      const CompletionRequest& request) {
    httplib::Client client(config.base_url);
    client.set_read_timeout(config.timeout_seconds, 0);
    client.set_connection_timeout(config.timeout_seconds, 0);
    httplib::Headers headers;
    if (!config.credential.empty())
        headers.emplace("Authorization", "Bearer " + config.credential);
    auto res = client.Post(config.path, headers,
                           completion_request_json(config, request).dump(),
                           "application/json");
    if (!res) throw TransportError("transport failure: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500)
        throw TransportError("retryable status " + std::to_string(res->status));
    if (res->status != 200)
        throw BackendRefusal(res->status, "backend refused: status " +
                                              std::to_string(res->status) + " " +
                                              res->body.substr(0, 200));
    return parse_completion_response(config, res->body);
}

inline void Gateway::default_sleeper(std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
}

}  // namespace dolores
#else
namespace dolores {

inline CompletionResult http_complete(const HttpBackendConfig&,
                                      const CompletionRequest&) {
    throw ConfigError("HTTP backend not compiled in (DOLORES_ENABLE_HTTP)");
}

inline void Gateway::default_sleeper(std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
}

}  // namespace dolores
#endif
