#pragma once

// Example store: namespaced atomic decomposition examples, loaded from a
// plain-text block format, selected by namespace and rendered into system
// prompts (examples / no-examples / principles modes).

#include <dolores/errors.hpp>
#include <dolores/interp.hpp>
#include <dolores/lexer.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace dolores {

// ---------------------------------------------------------------------------
// Domain types

struct ExampleTurn {
    std::string thought;  // may be empty: some turns go straight to code
    std::string code;
    std::optional<std::string> observation;  // absent only on the final turn

    bool operator==(const ExampleTurn&) const = default;
};

struct DecompositionExample {
    std::string ns;
    std::string task;
    std::vector<ExampleTurn> turns;

    bool operator==(const DecompositionExample&) const = default;
};

class ExampleLibrary {
public:
    ExampleLibrary() = default;
    explicit ExampleLibrary(std::vector<DecompositionExample> examples)
        : examples_(std::move(examples)) {
        for (size_t i = 0; i < examples_.size(); ++i)
            index_[examples_[i].ns].push_back(i);
    }

    const std::vector<DecompositionExample>& examples() const { return examples_; }
    bool empty() const { return examples_.empty(); }
    size_t size() const { return examples_.size(); }

    std::vector<std::string> namespaces() const {
        std::vector<std::string> out;
        for (const auto& ex : examples_)
            if (std::find(out.begin(), out.end(), ex.ns) == out.end())
                out.push_back(ex.ns);
        return out;
    }

    /// First namespace in file order, unless overridden via config.
    std::string default_namespace() const {
        return examples_.empty() ? std::string() : examples_.front().ns;
    }

    /// All examples in `ns`, in file order. No match -> the default-namespace
    /// examples; if that is empty too, the empty list (no-examples mode).
    std::vector<DecompositionExample> select(const std::string& ns,
                                             const std::string& default_ns = "") const {
        auto collect = [this](const std::string& key) {
            std::vector<DecompositionExample> out;
            auto it = index_.find(key);
            if (it != index_.end())
                for (size_t i : it->second) out.push_back(examples_[i]);
            return out;
        };
        std::vector<DecompositionExample> hit = collect(ns);
        if (!hit.empty()) return hit;
        std::string fallback = default_ns.empty() ? default_namespace() : default_ns;
        return collect(fallback);
    }

    bool operator==(const ExampleLibrary& o) const { return examples_ == o.examples_; }

private:
    std::vector<DecompositionExample> examples_;
    std::map<std::string, std::vector<size_t>> index_;
};

// ---------------------------------------------------------------------------
// File format
//
//   [EXAMPLE namespace="lookup"]
//   [TASK]
//   ...task text...
//   [THOUGHT]
//   ...optional, precedes its code block...
//   [CODE]
//   ...source...
//   [OBSERVATION]
//   ...recorded observation...
//   [/EXAMPLE]
//
// Markers sit alone on a line; block content runs to the next marker with the
// final newline trimmed. Documented extension: .dexp

namespace detail {

inline std::string trim_trailing_newline(std::string s) {
    if (!s.empty() && s.back() == '\n') s.pop_back();
    return s;
}

inline bool is_blank(const std::string& line) {
    return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace detail

inline ExampleLibrary load_library(const std::string& document) {
    std::vector<DecompositionExample> examples;
    std::optional<DecompositionExample> cur;
    // block being accumulated: kind marker + content lines
    std::string block_kind;
    std::string block_text;
    int block_line = 0;
    // turn under construction
    std::optional<ExampleTurn> turn;
    bool saw_task = false;

    auto close_turn = [&](int line) {
        if (!turn) return;
        if (turn->code.empty())
            throw FormatError(line, "[THOUGHT] without a following [CODE] block");
        cur->turns.push_back(std::move(*turn));
        turn.reset();
    };
    auto flush_block = [&](int line) {
        if (block_kind.empty()) return;
        std::string text = detail::trim_trailing_newline(block_text);
        if (block_kind == "TASK") {
            cur->task = text;
            saw_task = true;
        } else if (block_kind == "THOUGHT") {
            close_turn(line);
            turn = ExampleTurn{};
            turn->thought = text;
        } else if (block_kind == "CODE") {
            if (turn && !turn->code.empty()) close_turn(line);
            if (!turn) turn = ExampleTurn{};
            turn->code = text;
        } else {  // OBSERVATION
            if (!turn || turn->code.empty())
                throw FormatError(block_line, "[OBSERVATION] without a preceding [CODE]");
            turn->observation = text;
            close_turn(line);
        }
        block_kind.clear();
        block_text.clear();
    };

    int lineno = 0;
    size_t pos = 0;
    while (pos <= document.size()) {
        size_t nl = document.find('\n', pos);
        if (nl == std::string::npos && pos == document.size()) break;
        std::string line = document.substr(pos, nl == std::string::npos
                                                    ? std::string::npos
                                                    : nl - pos);
        pos = nl == std::string::npos ? document.size() : nl + 1;
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();

        if (line.rfind("[EXAMPLE ", 0) == 0) {
            if (cur) throw FormatError(lineno, "nested [EXAMPLE]");
            const std::string prefix = "[EXAMPLE namespace=\"";
            size_t close = line.rfind("\"]");
            if (line.rfind(prefix, 0) != 0 || close == std::string::npos ||
                close < prefix.size())
                throw FormatError(lineno, "malformed [EXAMPLE] header");
            cur = DecompositionExample{};
            cur->ns = line.substr(prefix.size(), close - prefix.size());
            if (cur->ns.empty()) throw FormatError(lineno, "empty namespace");
            saw_task = false;
        } else if (line == "[/EXAMPLE]") {
            if (!cur) throw FormatError(lineno, "[/EXAMPLE] without open [EXAMPLE]");
            flush_block(lineno);
            close_turn(lineno);
            if (!saw_task) throw FormatError(lineno, "example has no [TASK] block");
            if (cur->turns.empty()) throw FormatError(lineno, "example has no turns");
            for (size_t i = 0; i + 1 < cur->turns.size(); ++i)
                if (!cur->turns[i].observation)
                    throw FormatError(lineno, "non-final turn lacks an [OBSERVATION]");
            if (cur->turns.back().code.find("FinalAnswer(") == std::string::npos)
                throw FormatError(lineno, "final turn's code lacks a FinalAnswer call");
            examples.push_back(std::move(*cur));
            cur.reset();
        } else if (line == "[TASK]" || line == "[THOUGHT]" || line == "[CODE]" ||
                   line == "[OBSERVATION]") {
            if (!cur) throw FormatError(lineno, line + " outside an [EXAMPLE]");
            flush_block(lineno);
            block_kind = line.substr(1, line.size() - 2);
            block_line = lineno;
        } else if (line.size() > 2 && line.front() == '[' && line.back() == ']' &&
                   line.find_first_not_of("ABCDEFGHIJKLMNOPQRSTUVWXYZ/", 1) ==
                       line.size() - 1) {
            // marker-shaped line ([ALLCAPS] or [/ALLCAPS]) that is none of ours
            throw FormatError(lineno, "unknown block kind " + line);
        } else if (cur) {
            if (block_kind.empty()) {
                if (!detail::is_blank(line))
                    throw FormatError(lineno, "content outside any block");
            } else {
                block_text += line;
                block_text += '\n';
            }
        } else if (!detail::is_blank(line)) {
            throw FormatError(lineno, "content outside any [EXAMPLE]");
        }
    }
    if (cur) throw FormatError(lineno, "unterminated [EXAMPLE]");
    return ExampleLibrary(std::move(examples));
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline ExampleLibrary load_library_file(const std::string& path) {
    try {
        return load_library(read_text_file(path));
    } catch (const FormatError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline std::string render_library(const ExampleLibrary& lib) {
    std::string out;
    for (const auto& ex : lib.examples()) {
        out += "[EXAMPLE namespace=\"" + ex.ns + "\"]\n";
        out += "[TASK]\n" + ex.task + "\n";
        for (const auto& t : ex.turns) {
            if (!t.thought.empty()) out += "[THOUGHT]\n" + t.thought + "\n";
            out += "[CODE]\n" + t.code + "\n";
            if (t.observation) out += "[OBSERVATION]\n" + *t.observation + "\n";
        }
        out += "[/EXAMPLE]\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// System prompt rendering

enum class PromptMode { Examples, NoExamples, Principles };

inline PromptMode prompt_mode_from_string(const std::string& s) {
    if (s == "examples") return PromptMode::Examples;
    if (s == "no-examples") return PromptMode::NoExamples;
    if (s == "principles") return PromptMode::Principles;
    throw ConfigError("unknown prompt mode: " + s);
}

struct VarDoc {
    std::string name;
    std::string description;
    std::string type_summary;
};

/// Code-block delimiters shared with the agent loop's turn parser.
inline constexpr const char* kCodeOpen = "<repl>";
inline constexpr const char* kCodeClose = "</repl>";
inline constexpr const char* kObservationPrefix = "Observation:";

inline std::string render_example(const DecompositionExample& ex) {
    std::string out = "Task: " + ex.task + "\n";
    for (const auto& t : ex.turns) {
        out += '\n';
        if (!t.thought.empty()) out += t.thought + "\n";
        out += std::string(kCodeOpen) + "\n" + t.code + "\n" + kCodeClose + "\n";
        if (t.observation)
            out += std::string(kObservationPrefix) + "\n" + *t.observation + "\n";
    }
    return out;
}

inline std::string render_system_prompt(const std::vector<DecompositionExample>& examples,
                                        const std::vector<HostFunction>& hosts,
                                        const std::vector<VarDoc>& vars, PromptMode mode,
                                        const std::string& principles_text = "") {
    if (mode == PromptMode::Principles && principles_text.empty())
        throw ConfigError("principles mode requires the principles text asset");

    std::string out;
    out +=
        "You are a reasoning agent operating a read-eval-print loop.\n"
        "Split the task into small steps: delegate exact computation to code,\n"
        "delegate fuzzy judgement to the `llm` host function, and hand subtasks\n"
        "that need their own reasoning loop to recursive calls. Each of your\n"
        "turns is a short thought followed by exactly one code block opened by\n"
        "a line `" +
        std::string(kCodeOpen) + "` and closed by a line `" + kCodeClose +
        "`. After the block\n"
        "executes you receive an `" +
        kObservationPrefix +
        "` message with its output. Finish by\n"
        "calling FinalAnswer(value).\n";

    if (!hosts.empty()) {
        out += "\nHost functions:\n";
        for (const auto& h : hosts) {
            out += "  " + (h.signature.empty() ? h.name + "(...)" : h.signature) + "\n";
            if (!h.doc.empty()) out += "    " + h.doc + "\n";
        }
    }
    if (!vars.empty()) {
        out += '\n';
        for (const auto& v : vars) {
            out += "Variable `" + v.name + "`: " + v.description + "\n";
            if (!v.type_summary.empty()) out += "  type: " + v.type_summary + "\n";
        }
    }
    if (mode == PromptMode::Examples) {
        for (const auto& ex : examples) out += "\n" + render_example(ex);
    } else if (mode == PromptMode::Principles) {
        out += "\n" + principles_text;
        if (out.back() != '\n') out += '\n';
    }
    return out;
}

}  // namespace dolores
