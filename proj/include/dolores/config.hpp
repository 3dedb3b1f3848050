#pragma once

// Flat sectioned key=value configuration.
//
//   # comment
//   [backend]
//   kind = mock
//   mock_script = scripts/run.mock
//
// Credentials never appear in a file: [backend] credential_env names an
// environment variable and the value is read from the process environment.

#include <dolores/errors.hpp>
#include <dolores/examples.hpp>
#include <dolores/gateway.hpp>
#include <dolores/kernel.hpp>

#include <cstdlib>
#include <map>
#include <string>

namespace dolores {

class ConfigFile {
public:
    using Section = std::map<std::string, std::string>;

    static ConfigFile parse(const std::string& text) {
        ConfigFile cfg;
        cfg.source_ = text;
        std::string section;
        int lineno = 0;
        size_t pos = 0;
        while (pos < text.size()) {
            size_t nl = text.find('\n', pos);
            std::string line = text.substr(
                pos, nl == std::string::npos ? std::string::npos : nl - pos);
            pos = nl == std::string::npos ? text.size() : nl + 1;
            ++lineno;
            std::string t = trim(line);
            if (t.empty() || t[0] == '#') continue;
            if (t.front() == '[') {
                if (t.back() != ']' || t.size() < 3)
                    throw ConfigError("config line " + std::to_string(lineno) +
                                      ": malformed section header");
                section = t.substr(1, t.size() - 2);
                cfg.sections_[section];
                continue;
            }
            size_t eq = t.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": expected key = value");
            if (section.empty())
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": key outside any [section]");
            std::string key = trim(t.substr(0, eq));
            std::string value = trim(t.substr(eq + 1));
            if (key.empty())
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": empty key");
            cfg.sections_[section][key] = value;
        }
        return cfg;
    }

    static ConfigFile parse_file(const std::string& path) {
        return parse(read_text_file(path));
    }

    bool has(const std::string& section, const std::string& key) const {
        auto s = sections_.find(section);
        return s != sections_.end() && s->second.count(key);
    }

    std::string get(const std::string& section, const std::string& key,
                    const std::string& fallback = "") const {
        auto s = sections_.find(section);
        if (s == sections_.end()) return fallback;
        auto k = s->second.find(key);
        return k == s->second.end() ? fallback : k->second;
    }

    std::string require(const std::string& section, const std::string& key) const {
        if (!has(section, key))
            throw ConfigError("missing required config key [" + section + "] " +
                              key);
        return get(section, key);
    }

    std::int64_t get_int(const std::string& section, const std::string& key,
                         std::int64_t fallback) const {
        if (!has(section, key)) return fallback;
        const std::string v = get(section, key);
        try {
            size_t used = 0;
            std::int64_t n = std::stoll(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return n;
        } catch (const std::exception&) {
            throw ConfigError("config key [" + section + "] " + key +
                              " is not an integer: " + v);
        }
    }

    bool get_bool(const std::string& section, const std::string& key,
                  bool fallback) const {
        if (!has(section, key)) return fallback;
        const std::string v = get(section, key);
        if (v == "true" || v == "yes" || v == "1") return true;
        if (v == "false" || v == "no" || v == "0") return false;
        throw ConfigError("config key [" + section + "] " + key +
                          " is not a boolean: " + v);
    }

    /// The verbatim text the config was parsed from (for run snapshots).
    const std::string& source() const { return source_; }

private:
    static std::string trim(const std::string& s) {
        size_t a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return "";
        size_t b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    }

    std::map<std::string, Section> sections_;
    std::string source_;
};

inline KernelConfig kernel_config_from(const ConfigFile& cfg) {
    KernelConfig kc;
    kc.budgets.max_depth =
        (int)cfg.get_int("budgets", "max_depth", kc.budgets.max_depth);
    kc.budgets.max_turns_per_thread = (int)cfg.get_int(
        "budgets", "max_turns_per_thread", kc.budgets.max_turns_per_thread);
    kc.budgets.max_total_tokens =
        cfg.get_int("budgets", "max_total_tokens", kc.budgets.max_total_tokens);
    kc.budgets.observation_char_budget =
        (int)cfg.get_int("budgets", "observation_char_budget",
                         kc.budgets.observation_char_budget);
    kc.budgets.max_parallel_children = (int)cfg.get_int(
        "budgets", "max_parallel_children", kc.budgets.max_parallel_children);
    kc.max_new_tokens =
        (int)cfg.get_int("backend", "max_new_tokens", kc.max_new_tokens);
    kc.prompt_mode = prompt_mode_from_string(cfg.get("prompt", "mode", "examples"));
    kc.default_namespace = cfg.get("prompt", "namespace", "");
    if (kc.prompt_mode == PromptMode::Principles)
        kc.principles_text =
            read_text_file(cfg.require("prompt", "principles"));
    return kc;
}

inline HttpBackendConfig http_backend_config_from(const ConfigFile& cfg) {
    HttpBackendConfig hc;
    hc.base_url = cfg.require("backend", "base_url");
    hc.model = cfg.require("backend", "model");
    hc.path = cfg.get("backend", "path", hc.path);
    hc.timeout_seconds =
        (int)cfg.get_int("backend", "timeout_seconds", hc.timeout_seconds);
    hc.reasoning_open = cfg.get("backend", "reasoning_open", "");
    hc.reasoning_close = cfg.get("backend", "reasoning_close", "");
    std::string env_name = cfg.get("backend", "credential_env", "");
    if (!env_name.empty()) {
        const char* v = std::getenv(env_name.c_str());
        if (v) hc.credential = v;
    }
    return hc;
}

}  // namespace dolores
