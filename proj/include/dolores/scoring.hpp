#pragma once

// Answer scoring: exact-set F1, bag-of-tokens F1, and relaxed numeric match.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <string>

namespace dolores {

/// Precision/recall harmonic mean over exact string sets. Both empty counts
/// as a correct (vacuous) answer; an empty prediction against a non-empty
/// gold scores zero.
inline double score_set_f1(const std::set<std::string>& predicted,
                           const std::set<std::string>& gold) {
    if (predicted.empty() && gold.empty()) return 1.0;
    if (predicted.empty() || gold.empty()) return 0.0;
    size_t hit = 0;
    for (const std::string& p : predicted)
        if (gold.count(p)) ++hit;
    if (hit == 0) return 0.0;
    double precision = double(hit) / double(predicted.size());
    double recall = double(hit) / double(gold.size());
    return 2.0 * precision * recall / (precision + recall);
}

inline std::map<std::string, int> token_bag(const std::string& text) {
    std::map<std::string, int> bag;
    std::string cur;
    for (char c : text) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            if (!cur.empty()) bag[cur] += 1;
            cur.clear();
        } else {
            cur += (char)std::tolower((unsigned char)c);
        }
    }
    if (!cur.empty()) bag[cur] += 1;
    return bag;
}

/// Bag-of-tokens F1 over lowercased whitespace-split tokens.
inline double score_token_f1(const std::string& predicted, const std::string& gold) {
    std::map<std::string, int> p = token_bag(predicted);
    std::map<std::string, int> g = token_bag(gold);
    if (p.empty() && g.empty()) return 1.0;
    if (p.empty() || g.empty()) return 0.0;
    int overlap = 0, np = 0, ng = 0;
    for (const auto& [tok, n] : p) np += n;
    for (const auto& [tok, n] : g) ng += n;
    for (const auto& [tok, n] : p) {
        auto it = g.find(tok);
        if (it != g.end()) overlap += std::min(n, it->second);
    }
    if (overlap == 0) return 0.0;
    double precision = double(overlap) / double(np);
    double recall = double(overlap) / double(ng);
    return 2.0 * precision * recall / (precision + recall);
}

/// Correct iff |predicted - gold| <= tolerance * |gold|; a gold of zero
/// demands an exact zero.
inline bool score_relaxed_numeric(double predicted, double gold,
                                  double tolerance = 0.05) {
    if (gold == 0.0) return predicted == 0.0;
    return std::fabs(predicted - gold) <= tolerance * std::fabs(gold);
}

inline std::optional<double> parse_number(const std::string& text) {
    size_t a = text.find_first_not_of(" \t\n\r");
    if (a == std::string::npos) return std::nullopt;
    size_t b = text.find_last_not_of(" \t\n\r%");
    std::string core = text.substr(a, b - a + 1);
    char* end = nullptr;
    double v = std::strtod(core.c_str(), &end);
    if (end != core.c_str() + core.size()) return std::nullopt;
    return v;
}

/// String-level wrapper: an unparseable prediction is simply incorrect.
inline bool score_relaxed_numeric(const std::string& predicted, double gold,
                                  double tolerance = 0.05) {
    std::optional<double> v = parse_number(predicted);
    return v && score_relaxed_numeric(*v, gold, tolerance);
}

}  // namespace dolores
