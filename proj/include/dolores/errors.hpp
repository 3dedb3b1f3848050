#pragma once

#include <stdexcept>
#include <string>

namespace dolores {

struct Span {
    int line = 0;
    int column = 0;
};

inline std::string span_str(Span s) {
    return std::to_string(s.line) + ":" + std::to_string(s.column);
}

struct LexError : std::runtime_error {
    std::string kind;
    Span span;
    LexError(std::string k, std::string msg, Span sp)
        : std::runtime_error(msg), kind(std::move(k)), span(sp) {}
};

struct SyntaxError : std::runtime_error {
    Span span;
    SyntaxError(std::string msg, Span sp) : std::runtime_error(msg), span(sp) {}
};

enum class ErrKind {
    NameUnbound,
    TypeMismatch,
    IndexOutOfRange,
    KeyMissing,
    HostFailure,
    BudgetExceeded,
};

inline const char* err_kind_name(ErrKind k) {
    switch (k) {
        case ErrKind::NameUnbound: return "name-unbound";
        case ErrKind::TypeMismatch: return "type-mismatch";
        case ErrKind::IndexOutOfRange: return "index-out-of-range";
        case ErrKind::KeyMissing: return "key-missing";
        case ErrKind::HostFailure: return "host-failure";
        case ErrKind::BudgetExceeded: return "budget-exceeded";
    }
    return "unknown";
}

struct RuntimeError : std::runtime_error {
    ErrKind kind;
    Span span;
    RuntimeError(ErrKind k, std::string msg, Span sp = {})
        : std::runtime_error(msg), kind(k), span(sp) {}
};

struct FormatError : std::runtime_error {
    int line;
    FormatError(int l, std::string reason)
        : std::runtime_error(std::move(reason)), line(l) {}
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace dolores
