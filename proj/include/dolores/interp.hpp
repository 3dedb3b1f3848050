#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dolores/ast.hpp"
#include "dolores/errors.hpp"
#include "dolores/parser.hpp"
#include "dolores/value.hpp"

namespace dolores {

// ---------------------------------------------------------------------------
// Environment

class Environment {
public:
    Environment() = default;
    explicit Environment(std::shared_ptr<Environment> parent) : parent_(std::move(parent)) {}

    const Value* lookup(const std::string& name) const {
        auto it = bindings_.find(name);
        if (it != bindings_.end()) return &it->second;
        return parent_ ? parent_->lookup(name) : nullptr;
    }
    void set(const std::string& name, Value v) { bindings_[name] = std::move(v); }
    const std::map<std::string, Value>& bindings() const { return bindings_; }

private:
    std::map<std::string, Value> bindings_;
    std::shared_ptr<Environment> parent_;
};

using EnvPtr = std::shared_ptr<Environment>;

// ---------------------------------------------------------------------------
// Host functions

enum class EffectClass { Pure, AssociativeCall, RecursiveCall, ToolCall, Terminal };

struct HostFunction {
    std::string name;
    std::string signature;  // e.g. "llm(prompt, **vars) -> str"
    std::string doc;
    EffectClass effect = EffectClass::Pure;
    int min_args = 0;
    int max_args = -1;  // -1: variadic
    bool allow_kwargs = false;
    bool may_block = false;
    std::function<Value(ValueList&, Kwargs&, Span)> fn;
};

/// Thrown by the FinalAnswer host; unwinds evaluation immediately.
struct FinalAnswerSignal {
    Value value;
};

class HostRegistry {
public:
    void add(HostFunction h) {
        if (by_name_.count(h.name))
            throw ConfigError("duplicate host function: " + h.name);
        if (h.effect == EffectClass::Terminal && h.name != "FinalAnswer")
            throw ConfigError("FinalAnswer is the only terminal host function");
        order_.push_back(h.name);
        by_name_[h.name] = std::move(h);
    }
    void alias(const std::string& alt, const std::string& target) {
        aliases_[alt] = target;
    }
    const HostFunction* find(const std::string& name) const {
        auto it = by_name_.find(name);
        if (it != by_name_.end()) return &it->second;
        auto al = aliases_.find(name);
        if (al != aliases_.end()) return find(al->second);
        return nullptr;
    }
    bool empty() const { return by_name_.empty(); }
    const std::vector<std::string>& names() const { return order_; }

private:
    std::map<std::string, HostFunction> by_name_;
    std::map<std::string, std::string> aliases_;
    std::vector<std::string> order_;
};

// ---------------------------------------------------------------------------
// Evaluation outcome

struct EvalError {
    ErrKind kind = ErrKind::TypeMismatch;
    std::string message;
    Span span;
};

struct EvalOutcome {
    std::optional<Value> result;  // value of the last expression statement
    std::vector<std::string> printed;
    std::optional<Value> terminal;  // FinalAnswer payload
    std::optional<EvalError> error;
};

struct EvalLimits {
    long long max_steps = 100000;
};

// ---------------------------------------------------------------------------
// Interpreter

class Interp {
public:
    Interp(EnvPtr env, const HostRegistry& hosts, EvalLimits limits)
        : env_(std::move(env)), hosts_(hosts), limits_(limits) {}

    EvalOutcome run(const Program& prog) {
        EvalOutcome out;
        printed_ = &out.printed;
        try {
            for (const StmtPtr& st : prog.statements) {
                if (st->kind == StmtKind::ExprStmt)
                    out.result = exec_expr_stmt(*st);
                else
                    exec_stmt(*st, env_);
            }
        } catch (const FinalAnswerSignal& fa) {
            out.terminal = fa.value;
        } catch (const RuntimeError& e) {
            out.error = EvalError{e.kind, e.what(), e.span};
        }
        printed_ = nullptr;
        return out;
    }

    Value call_value(const Value& fn, ValueList& args, Kwargs& kwargs, Span sp) {
        if (!fn.is_callable())
            throw RuntimeError(ErrKind::TypeMismatch,
                               std::string("value of type ") + fn.kind_name() +
                                   " is not callable",
                               sp);
        return fn.as_callable().fn(*this, args, kwargs, sp);
    }

    void emit_print(std::string line) {
        if (printed_) printed_->push_back(std::move(line));
    }

    void step(Span sp) {
        if (++steps_ > limits_.max_steps)
            throw RuntimeError(ErrKind::BudgetExceeded,
                               "evaluation step budget of " +
                                   std::to_string(limits_.max_steps) + " exceeded",
                               sp);
    }

    Value eval(const Expr& e, const EnvPtr& env);

private:
    Value exec_expr_stmt(const Stmt& st) {
        step(st.span);
        return eval(*st.value, env_);
    }

    void exec_stmt(const Stmt& st, const EnvPtr& env) {
        step(st.span);
        switch (st.kind) {
            case StmtKind::ExprStmt:
                eval(*st.value, env);
                return;
            case StmtKind::Assign: {
                Value v = eval(*st.value, env);
                assign_to(*st.target, v, env);
                return;
            }
            case StmtKind::For: {
                Value it = eval(*st.value, env);
                for (Value& item : iterable_items(it, st.span)) {
                    bind_targets(st.names, item, env, st.span);
                    for (const StmtPtr& s : st.body) exec_stmt(*s, env);
                }
                return;
            }
            case StmtKind::If: {
                for (const IfBranch& br : st.branches) {
                    if (!br.cond || eval(*br.cond, env).truthy()) {
                        for (const StmtPtr& s : br.body) exec_stmt(*s, env);
                        return;
                    }
                }
                return;
            }
        }
    }

    void assign_to(const Expr& target, Value v, const EnvPtr& env) {
        if (target.kind == ExprKind::Name) {
            env->set(target.str_val, std::move(v));
            return;
        }
        if (target.kind == ExprKind::Subscript) {
            Value obj = eval(*target.a, env);
            Value key = eval(*target.b, env);
            if (obj.is_map()) {
                check_key_type(key, target.span);
                obj.as_map().set(key, v);
                return;
            }
            if (obj.is_list()) {
                long long i = index_of(key, obj.as_list().size(), target.span);
                obj.as_list()[size_t(i)] = std::move(v);
                return;
            }
            throw RuntimeError(ErrKind::TypeMismatch,
                               std::string("cannot assign into ") + obj.kind_name(),
                               target.span);
        }
        throw RuntimeError(ErrKind::TypeMismatch, "unsupported assignment target",
                           target.span);
    }

    void bind_targets(const std::vector<std::string>& names, Value& item, const EnvPtr& env,
                      Span sp) {
        if (names.size() == 1) {
            env->set(names[0], item);
            return;
        }
        const ValueList* seq = nullptr;
        if (item.is_tuple())
            seq = &item.as_tuple();
        else if (item.is_list())
            seq = &item.as_list();
        if (!seq || seq->size() != names.size())
            throw RuntimeError(ErrKind::TypeMismatch,
                               "cannot unpack " + std::string(item.kind_name()) + " into " +
                                   std::to_string(names.size()) + " names",
                               sp);
        for (size_t i = 0; i < names.size(); ++i) env->set(names[i], (*seq)[i]);
    }

public:
    static ValueList iterable_items(const Value& v, Span sp) {
        if (v.is_list()) return v.as_list();
        if (v.is_tuple()) return v.as_tuple();
        if (v.is_str()) {
            ValueList out;
            for (char c : v.as_str()) out.push_back(Value::str(std::string(1, c)));
            return out;
        }
        if (v.is_map()) {
            ValueList out;
            for (const auto& [k, val] : v.as_map().items) out.push_back(k);
            return out;
        }
        throw RuntimeError(ErrKind::TypeMismatch,
                           std::string(v.kind_name()) + " is not iterable", sp);
    }

    static void check_key_type(const Value& key, Span sp) {
        if (!key.is_str() && !key.is_number())
            throw RuntimeError(ErrKind::TypeMismatch,
                               std::string("map keys must be strings or numbers, got ") +
                                   key.kind_name(),
                               sp);
    }

    static long long index_of(const Value& key, size_t size, Span sp) {
        if (!key.is_int())
            throw RuntimeError(ErrKind::TypeMismatch,
                               std::string("indices must be integers, got ") +
                                   key.kind_name(),
                               sp);
        long long i = key.as_int().convert_to<long long>();
        long long n = (long long)size;
        if (i < 0) i += n;
        if (i < 0 || i >= n)
            throw RuntimeError(ErrKind::IndexOutOfRange,
                               "index " + key.as_int().str() + " out of range for length " +
                                   std::to_string(n),
                               sp);
        return i;
    }

    const HostRegistry& hosts() const { return hosts_; }

private:
    Value eval_binary(const Expr& e, const EnvPtr& env);
    Value eval_compare(const Expr& e, const EnvPtr& env);
    Value eval_call(const Expr& e, const EnvPtr& env);
    Value eval_attribute(const Expr& e, const EnvPtr& env);
    Value eval_comprehension(const Expr& e, const EnvPtr& env);
    Value resolve_name(const std::string& name, const EnvPtr& env, Span sp);
    Value host_callable(const HostFunction& h);

    EnvPtr env_;
    const HostRegistry& hosts_;
    EvalLimits limits_;
    long long steps_ = 0;
    std::vector<std::string>* printed_ = nullptr;
};

// ---------------------------------------------------------------------------
// Shared value helpers

inline bool value_less(const Value& a, const Value& b, Span sp) {
    if (a.is_number() && b.is_number()) {
        if (a.is_int() && b.is_int()) return a.as_int() < b.as_int();
        return a.as_number() < b.as_number();
    }
    if (a.is_str() && b.is_str()) return a.as_str() < b.as_str();
    if ((a.is_list() && b.is_list()) || (a.is_tuple() && b.is_tuple())) {
        const ValueList& x = a.is_list() ? a.as_list() : a.as_tuple();
        const ValueList& y = b.is_list() ? b.as_list() : b.as_tuple();
        size_t n = std::min(x.size(), y.size());
        for (size_t i = 0; i < n; ++i) {
            if (value_less(x[i], y[i], sp)) return true;
            if (value_less(y[i], x[i], sp)) return false;
        }
        return x.size() < y.size();
    }
    throw RuntimeError(ErrKind::TypeMismatch,
                       std::string("cannot order ") + a.kind_name() + " and " +
                           b.kind_name(),
                       sp);
}

inline bool value_contains(const Value& container, const Value& item, Span sp) {
    if (container.is_str()) {
        if (!item.is_str())
            throw RuntimeError(ErrKind::TypeMismatch,
                               "'in <str>' requires a string operand", sp);
        return container.as_str().find(item.as_str()) != std::string::npos;
    }
    if (container.is_list() || container.is_tuple()) {
        const ValueList& items =
            container.is_list() ? container.as_list() : container.as_tuple();
        for (const Value& v : items)
            if (v == item) return true;
        return false;
    }
    if (container.is_map()) return container.as_map().find(item) != nullptr;
    throw RuntimeError(ErrKind::TypeMismatch,
                       std::string(container.kind_name()) + " does not support 'in'", sp);
}

namespace methods {

inline Value bound(const std::string& name,
                   std::function<Value(Interp&, ValueList&, Kwargs&, Span)> fn) {
    return Value::callable(name, std::move(fn));
}

inline void need_args(const ValueList& args, size_t lo, size_t hi, const std::string& name,
                      Span sp) {
    if (args.size() < lo || args.size() > hi)
        throw RuntimeError(ErrKind::TypeMismatch,
                           name + "() takes " + std::to_string(lo) +
                               (hi == lo ? "" : ".." + std::to_string(hi)) +
                               " arguments, got " + std::to_string(args.size()),
                           sp);
}

inline const std::string& str_arg(const ValueList& args, size_t i, const std::string& name,
                                  Span sp) {
    if (!args[i].is_str())
        throw RuntimeError(ErrKind::TypeMismatch,
                           name + "() argument " + std::to_string(i + 1) +
                               " must be a string",
                           sp);
    return args[i].as_str();
}

Value string_method(const std::string& s, const std::string& name, Span sp);
Value list_method(const Value& listval, const std::string& name, Span sp);
Value map_method(const Value& mapval, const std::string& name, Span sp);

inline Value string_method(const std::string& s, const std::string& name, Span sp) {
    static const char* avail = "count, join, split, strip, lower, upper, startswith";
    if (name == "count") {
        return bound("str.count", [s](Interp&, ValueList& a, Kwargs&, Span csp) {
            need_args(a, 1, 1, "count", csp);
            const std::string& sub = str_arg(a, 0, "count", csp);
            if (sub.empty()) return Value::integer((long long)s.size() + 1);
            long long n = 0;
            size_t pos = 0;
            while ((pos = s.find(sub, pos)) != std::string::npos) {
                n++;
                pos += sub.size();
            }
            return Value::integer(n);
        });
    }
    if (name == "join") {
        return bound("str.join", [s](Interp&, ValueList& a, Kwargs&, Span csp) {
            need_args(a, 1, 1, "join", csp);
            ValueList items = Interp::iterable_items(a[0], csp);
            std::string out;
            for (size_t i = 0; i < items.size(); ++i) {
                if (!items[i].is_str())
                    throw RuntimeError(ErrKind::TypeMismatch,
                                       "join() requires strings", csp);
                if (i) out += s;
                out += items[i].as_str();
            }
            return Value::str(out);
        });
    }
    if (name == "split") {
        return bound("str.split", [s](Interp&, ValueList& a, Kwargs&, Span csp) {
            need_args(a, 0, 1, "split", csp);
            ValueList parts;
            if (a.empty()) {
                // whitespace split, empty fields dropped
                std::string cur;
                for (char c : s) {
                    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
                        if (!cur.empty()) parts.push_back(Value::str(cur));
                        cur.clear();
                    } else {
                        cur += c;
                    }
                }
                if (!cur.empty()) parts.push_back(Value::str(cur));
            } else {
                const std::string& sep = str_arg(a, 0, "split", csp);
                if (sep.empty())
                    throw RuntimeError(ErrKind::TypeMismatch, "empty separator", csp);
                size_t start = 0, pos;
                while ((pos = s.find(sep, start)) != std::string::npos) {
                    parts.push_back(Value::str(s.substr(start, pos - start)));
                    start = pos + sep.size();
                }
                parts.push_back(Value::str(s.substr(start)));
            }
            return Value::list(std::move(parts));
        });
    }
    if (name == "strip") {
        return bound("str.strip", [s](Interp&, ValueList& a, Kwargs&, Span csp) {
            need_args(a, 0, 0, "strip", csp);
            size_t b = s.find_first_not_of(" \t\n\r");
            if (b == std::string::npos) return Value::str("");
            size_t e = s.find_last_not_of(" \t\n\r");
            return Value::str(s.substr(b, e - b + 1));
        });
    }
    if (name == "lower" || name == "upper") {
        bool low = name == "lower";
        return bound("str." + name, [s, low](Interp&, ValueList& a, Kwargs&, Span csp) {
            need_args(a, 0, 0, low ? "lower" : "upper", csp);
            std::string out = s;
            for (char& c : out)
                c = low ? char(std::tolower((unsigned char)c))
                        : char(std::toupper((unsigned char)c));
            return Value::str(out);
        });
    }
    if (name == "startswith") {
        return bound("str.startswith", [s](Interp&, ValueList& a, Kwargs&, Span csp) {
            need_args(a, 1, 1, "startswith", csp);
            const std::string& p = str_arg(a, 0, "startswith", csp);
            return Value::boolean(s.rfind(p, 0) == 0);
        });
    }
    throw RuntimeError(ErrKind::TypeMismatch,
                       "string has no method '" + name + "'; available: " + avail, sp);
}

inline Value list_method(const Value& listval, const std::string& name, Span sp) {
    static const char* avail = "append, count, index";
    if (name == "append") {
        return bound("list.append", [listval](Interp&, ValueList& a, Kwargs&, Span csp) {
            need_args(a, 1, 1, "append", csp);
            listval.as_list().push_back(a[0]);
            return Value::none();
        });
    }
    if (name == "count") {
        return bound("list.count", [listval](Interp&, ValueList& a, Kwargs&, Span csp) {
            need_args(a, 1, 1, "count", csp);
            long long n = 0;
            for (const Value& v : listval.as_list())
                if (v == a[0]) n++;
            return Value::integer(n);
        });
    }
    if (name == "index") {
        return bound("list.index", [listval](Interp&, ValueList& a, Kwargs&, Span csp) {
            need_args(a, 1, 1, "index", csp);
            const ValueList& items = listval.as_list();
            for (size_t i = 0; i < items.size(); ++i)
                if (items[i] == a[0]) return Value::integer((long long)i);
            throw RuntimeError(ErrKind::KeyMissing, "value not in list", csp);
        });
    }
    throw RuntimeError(ErrKind::TypeMismatch,
                       "list has no method '" + name + "'; available: " + avail, sp);
}

inline Value map_method(const Value& mapval, const std::string& name, Span sp) {
    static const char* avail = "get, keys, values, items";
    if (name == "get") {
        return bound("map.get", [mapval](Interp&, ValueList& a, Kwargs&, Span csp) {
            need_args(a, 1, 2, "get", csp);
            const Value* v = mapval.as_map().find(a[0]);
            if (v) return *v;
            return a.size() == 2 ? a[1] : Value::none();
        });
    }
    if (name == "keys" || name == "values" || name == "items") {
        std::string which = name;
        return bound("map." + name, [mapval, which](Interp&, ValueList& a, Kwargs&, Span csp) {
            need_args(a, 0, 0, which, csp);
            ValueList out;
            for (const auto& [k, v] : mapval.as_map().items) {
                if (which == "keys")
                    out.push_back(k);
                else if (which == "values")
                    out.push_back(v);
                else
                    out.push_back(Value::tuple({k, v}));
            }
            return Value::list(std::move(out));
        });
    }
    throw RuntimeError(ErrKind::TypeMismatch,
                       "map has no method '" + name + "'; available: " + avail, sp);
}

}  // namespace methods

// ---------------------------------------------------------------------------
// Builtins

namespace builtins {

Value lookup(const std::string& name);

}  // namespace builtins

// ---------------------------------------------------------------------------
// Interp member definitions

inline Value Interp::resolve_name(const std::string& name, const EnvPtr& env, Span sp) {
    if (const Value* v = env->lookup(name)) return *v;
    Value b = builtins::lookup(name);
    if (!b.is_none()) return b;
    if (const HostFunction* h = hosts_.find(name)) return host_callable(*h);
    throw RuntimeError(ErrKind::NameUnbound, "name '" + name + "' is not defined", sp);
}

inline Value Interp::host_callable(const HostFunction& h) {
    const HostFunction* hp = &h;
    return Value::callable(h.name, [hp](Interp& in, ValueList& args, Kwargs& kwargs, Span sp) {
        if ((int)args.size() < hp->min_args ||
            (hp->max_args >= 0 && (int)args.size() > hp->max_args))
            throw RuntimeError(ErrKind::HostFailure,
                               hp->name + "() called with " + std::to_string(args.size()) +
                                   " positional arguments",
                               sp);
        if (!kwargs.empty() && !hp->allow_kwargs)
            throw RuntimeError(ErrKind::HostFailure,
                               hp->name + "() does not accept keyword arguments", sp);
        (void)in;
        return hp->fn(args, kwargs, sp);
    });
}

inline Value Interp::eval(const Expr& e, const EnvPtr& env) {
    step(e.span);
    switch (e.kind) {
        case ExprKind::NoneLit: return Value::none();
        case ExprKind::BoolLit: return Value::boolean(e.bool_val);
        case ExprKind::IntLit: return Value::integer(e.int_val);
        case ExprKind::FloatLit: return Value::real(e.float_val);
        case ExprKind::StrLit: return Value::str(e.str_val);
        case ExprKind::FString: {
            std::string out;
            for (const FStringPiece& p : e.pieces) {
                if (p.is_expr)
                    out += str_render(eval(*p.expr, env));
                else
                    out += p.text;
            }
            return Value::str(out);
        }
        case ExprKind::Name: return resolve_name(e.str_val, env, e.span);
        case ExprKind::ListLit: {
            ValueList items;
            for (const ExprPtr& it : e.items) items.push_back(eval(*it, env));
            return Value::list(std::move(items));
        }
        case ExprKind::TupleLit: {
            ValueList items;
            for (const ExprPtr& it : e.items) items.push_back(eval(*it, env));
            return Value::tuple(std::move(items));
        }
        case ExprKind::DictLit: {
            Value m = Value::map();
            for (size_t i = 0; i + 1 < e.items.size(); i += 2) {
                Value k = eval(*e.items[i], env);
                check_key_type(k, e.span);
                m.as_map().set(k, eval(*e.items[i + 1], env));
            }
            return m;
        }
        case ExprKind::Unary: {
            if (e.str_val == "not") return Value::boolean(!eval(*e.a, env).truthy());
            Value v = eval(*e.a, env);
            if (!v.is_number())
                throw RuntimeError(ErrKind::TypeMismatch,
                                   std::string("unary ") + e.str_val + " on " +
                                       v.kind_name(),
                                   e.span);
            if (e.str_val == "+") return v;
            if (v.is_int()) return Value::integer(-v.as_int());
            return Value::real(-v.as_float());
        }
        case ExprKind::Binary: return eval_binary(e, env);
        case ExprKind::Compare: return eval_compare(e, env);
        case ExprKind::Call: return eval_call(e, env);
        case ExprKind::Attribute: return eval_attribute(e, env);
        case ExprKind::Subscript: {
            Value obj = eval(*e.a, env);
            Value key = eval(*e.b, env);
            if (obj.is_map()) {
                const Value* v = obj.as_map().find(key);
                if (!v)
                    throw RuntimeError(ErrKind::KeyMissing,
                                       "key " + repr_render(key) + " not found", e.span);
                return *v;
            }
            if (obj.is_list() || obj.is_tuple()) {
                const ValueList& items = obj.is_list() ? obj.as_list() : obj.as_tuple();
                return items[size_t(index_of(key, items.size(), e.span))];
            }
            if (obj.is_str()) {
                long long i = index_of(key, obj.as_str().size(), e.span);
                return Value::str(std::string(1, obj.as_str()[size_t(i)]));
            }
            throw RuntimeError(ErrKind::TypeMismatch,
                               std::string(obj.kind_name()) + " is not subscriptable",
                               e.span);
        }
        case ExprKind::Slice: {
            Value obj = eval(*e.a, env);
            auto clamp = [&](const ExprPtr& ex, long long def, long long n) {
                if (!ex) return def;
                Value v = eval(*ex, env);
                if (!v.is_int())
                    throw RuntimeError(ErrKind::TypeMismatch,
                                       "slice bounds must be integers", e.span);
                long long i = v.as_int().convert_to<long long>();
                if (i < 0) i += n;
                return std::clamp(i, 0LL, n);
            };
            if (obj.is_str()) {
                long long n = (long long)obj.as_str().size();
                long long lo = clamp(e.b, 0, n), hi = clamp(e.c, n, n);
                if (lo >= hi) return Value::str("");
                return Value::str(obj.as_str().substr(size_t(lo), size_t(hi - lo)));
            }
            if (obj.is_list() || obj.is_tuple()) {
                const ValueList& items = obj.is_list() ? obj.as_list() : obj.as_tuple();
                long long n = (long long)items.size();
                long long lo = clamp(e.b, 0, n), hi = clamp(e.c, n, n);
                ValueList out;
                for (long long i = lo; i < hi; ++i) out.push_back(items[size_t(i)]);
                return obj.is_list() ? Value::list(std::move(out))
                                     : Value::tuple(std::move(out));
            }
            throw RuntimeError(ErrKind::TypeMismatch,
                               std::string(obj.kind_name()) + " is not sliceable", e.span);
        }
        case ExprKind::Comprehension: return eval_comprehension(e, env);
    }
    throw RuntimeError(ErrKind::TypeMismatch, "unreachable expression kind", e.span);
}

inline Value Interp::eval_binary(const Expr& e, const EnvPtr& env) {
    const std::string& op = e.str_val;
    if (op == "and") {
        Value l = eval(*e.a, env);
        return l.truthy() ? eval(*e.b, env) : l;
    }
    if (op == "or") {
        Value l = eval(*e.a, env);
        return l.truthy() ? l : eval(*e.b, env);
    }
    Value l = eval(*e.a, env);
    Value r = eval(*e.b, env);
    if (op == "+") {
        if (l.is_str() && r.is_str()) return Value::str(l.as_str() + r.as_str());
        if (l.is_list() && r.is_list()) {
            ValueList out = l.as_list();
            out.insert(out.end(), r.as_list().begin(), r.as_list().end());
            return Value::list(std::move(out));
        }
        if (l.is_tuple() && r.is_tuple()) {
            ValueList out = l.as_tuple();
            out.insert(out.end(), r.as_tuple().begin(), r.as_tuple().end());
            return Value::tuple(std::move(out));
        }
    }
    if (!l.is_number() || !r.is_number())
        throw RuntimeError(ErrKind::TypeMismatch,
                           "unsupported operand types for '" + op + "': " + l.kind_name() +
                               " and " + r.kind_name(),
                           e.span);
    bool both_int = l.is_int() && r.is_int();
    if (op == "/") {
        double d = r.as_number();
        if (d == 0.0)
            throw RuntimeError(ErrKind::TypeMismatch, "division by zero", e.span);
        return Value::real(l.as_number() / d);
    }
    if (both_int) {
        const BigInt& a = l.as_int();
        const BigInt& b = r.as_int();
        if (op == "+") return Value::integer(a + b);
        if (op == "-") return Value::integer(a - b);
        if (op == "*") return Value::integer(a * b);
        if (op == "//" || op == "%") {
            if (b == 0)
                throw RuntimeError(ErrKind::TypeMismatch, "division by zero", e.span);
            BigInt q = a / b;
            BigInt rem = a - q * b;
            if (rem != 0 && ((rem < 0) != (b < 0))) {
                q -= 1;
                rem += b;
            }
            return Value::integer(op == "%" ? rem : q);
        }
    }
    double a = l.as_number(), b = r.as_number();
    if (op == "+") return Value::real(a + b);
    if (op == "-") return Value::real(a - b);
    if (op == "*") return Value::real(a * b);
    if (op == "//") {
        if (b == 0.0)
            throw RuntimeError(ErrKind::TypeMismatch, "division by zero", e.span);
        return Value::real(std::floor(a / b));
    }
    if (op == "%") {
        if (b == 0.0)
            throw RuntimeError(ErrKind::TypeMismatch, "division by zero", e.span);
        double m = std::fmod(a, b);
        if (m != 0 && ((m < 0) != (b < 0))) m += b;
        return Value::real(m);
    }
    throw RuntimeError(ErrKind::TypeMismatch, "unknown operator '" + op + "'", e.span);
}

inline Value Interp::eval_compare(const Expr& e, const EnvPtr& env) {
    Value left = eval(*e.a, env);
    for (size_t i = 0; i < e.strs.size(); ++i) {
        Value right = eval(*e.items[i], env);
        const std::string& op = e.strs[i];
        bool ok;
        if (op == "==")
            ok = left == right;
        else if (op == "!=")
            ok = left != right;
        else if (op == "<")
            ok = value_less(left, right, e.span);
        else if (op == "<=")
            ok = !value_less(right, left, e.span);
        else if (op == ">")
            ok = value_less(right, left, e.span);
        else if (op == ">=")
            ok = !value_less(left, right, e.span);
        else if (op == "in")
            ok = value_contains(right, left, e.span);
        else  // not in
            ok = !value_contains(right, left, e.span);
        if (!ok) return Value::boolean(false);
        left = std::move(right);
    }
    return Value::boolean(true);
}

inline Value Interp::eval_call(const Expr& e, const EnvPtr& env) {
    Value fn;
    // Dotted host names like DoLoReS.add_task resolve through the registry
    // before ordinary attribute lookup.
    if (e.a->kind == ExprKind::Attribute && e.a->a->kind == ExprKind::Name &&
        !env->lookup(e.a->a->str_val)) {
        std::string dotted = e.a->a->str_val + "." + e.a->str_val;
        if (const HostFunction* h = hosts_.find(dotted)) fn = host_callable(*h);
    }
    if (fn.is_none()) fn = eval(*e.a, env);
    ValueList args;
    Kwargs kwargs;
    for (size_t i = 0; i < e.items.size(); ++i) {
        Value v = eval(*e.items[i], env);
        if (e.strs[i].empty())
            args.push_back(std::move(v));
        else
            kwargs.emplace_back(e.strs[i], std::move(v));
    }
    return call_value(fn, args, kwargs, e.span);
}

inline Value Interp::eval_attribute(const Expr& e, const EnvPtr& env) {
    if (e.a->kind == ExprKind::Name && !env->lookup(e.a->str_val)) {
        std::string dotted = e.a->str_val + "." + e.str_val;
        if (const HostFunction* h = hosts_.find(dotted)) return host_callable(*h);
    }
    Value obj = eval(*e.a, env);
    if (obj.is_str()) return methods::string_method(obj.as_str(), e.str_val, e.span);
    if (obj.is_list()) return methods::list_method(obj, e.str_val, e.span);
    if (obj.is_map()) return methods::map_method(obj, e.str_val, e.span);
    throw RuntimeError(ErrKind::TypeMismatch,
                       std::string(obj.kind_name()) + " has no attribute '" + e.str_val +
                           "'",
                       e.span);
}

inline Value Interp::eval_comprehension(const Expr& e, const EnvPtr& env) {
    ValueList out;
    EnvPtr scope = std::make_shared<Environment>(env);
    std::function<void(size_t)> recurse = [&](size_t ci) {
        if (ci == e.clauses.size()) {
            step(e.span);
            out.push_back(eval(*e.a, scope));
            return;
        }
        const CompClause& cl = e.clauses[ci];
        Value it = eval(*cl.iter, scope);
        for (Value& item : iterable_items(it, e.span)) {
            step(e.span);
            if (cl.targets.size() == 1) {
                scope->set(cl.targets[0], item);
            } else {
                const ValueList* seq = nullptr;
                if (item.is_tuple())
                    seq = &item.as_tuple();
                else if (item.is_list())
                    seq = &item.as_list();
                if (!seq || seq->size() != cl.targets.size())
                    throw RuntimeError(ErrKind::TypeMismatch,
                                       "cannot unpack comprehension item", e.span);
                for (size_t i = 0; i < cl.targets.size(); ++i)
                    scope->set(cl.targets[i], (*seq)[i]);
            }
            bool keep = true;
            for (const ExprPtr& cond : cl.ifs)
                if (!eval(*cond, scope).truthy()) {
                    keep = false;
                    break;
                }
            if (keep) recurse(ci + 1);
        }
    };
    recurse(0);
    return Value::list(std::move(out));
}

// ---------------------------------------------------------------------------
// Builtin definitions

namespace builtins {

inline Value make(const std::string& name,
                  std::function<Value(Interp&, ValueList&, Kwargs&, Span)> fn) {
    return Value::callable(name, std::move(fn));
}

inline void no_kwargs(const Kwargs& kwargs, const std::string& name, Span sp) {
    if (!kwargs.empty())
        throw RuntimeError(ErrKind::TypeMismatch,
                           name + "() got unexpected keyword argument '" +
                               kwargs.front().first + "'",
                           sp);
}

inline Value to_int(const Value& v, Span sp) {
    if (v.is_int()) return v;
    if (v.is_bool()) return Value::integer(v.as_bool() ? 1 : 0);
    if (v.is_float()) {
        double d = v.as_float();
        return Value::integer(BigInt(d < 0 ? std::ceil(d) : std::floor(d)));
    }
    if (v.is_str()) {
        std::string s = v.as_str();
        size_t b = s.find_first_not_of(" \t\n\r");
        size_t e = s.find_last_not_of(" \t\n\r");
        if (b == std::string::npos)
            throw RuntimeError(ErrKind::TypeMismatch, "invalid integer literal", sp);
        s = s.substr(b, e - b + 1);
        try {
            return Value::integer(BigInt(s));
        } catch (...) {
            throw RuntimeError(ErrKind::TypeMismatch,
                               "invalid integer literal " + repr_string(s), sp);
        }
    }
    throw RuntimeError(ErrKind::TypeMismatch,
                       std::string("cannot convert ") + v.kind_name() + " to int", sp);
}

inline Value round_value(const Value& v, int ndigits, bool have_ndigits, Span sp) {
    if (!v.is_number())
        throw RuntimeError(ErrKind::TypeMismatch, "round() requires a number", sp);
    if (v.is_int() && !have_ndigits) return v;
    double x = v.as_number();
    // half away from zero
    auto round_half_away = [](double d) {
        return d < 0 ? -std::floor(-d + 0.5) : std::floor(d + 0.5);
    };
    if (!have_ndigits) return Value::integer(BigInt(round_half_away(x)));
    double scale = std::pow(10.0, ndigits);
    return Value::real(round_half_away(x * scale) / scale);
}

inline Value lookup(const std::string& name) {
    if (name == "print")
        return make("print", [](Interp& in, ValueList& a, Kwargs& kw, Span sp) {
            no_kwargs(kw, "print", sp);
            std::string line;
            for (size_t i = 0; i < a.size(); ++i) {
                if (i) line += ' ';
                line += str_render(a[i]);
            }
            in.emit_print(std::move(line));
            return Value::none();
        });
    if (name == "len")
        return make("len", [](Interp&, ValueList& a, Kwargs& kw, Span sp) {
            no_kwargs(kw, "len", sp);
            methods::need_args(a, 1, 1, "len", sp);
            const Value& v = a[0];
            if (v.is_str()) return Value::integer((long long)v.as_str().size());
            if (v.is_list()) return Value::integer((long long)v.as_list().size());
            if (v.is_tuple()) return Value::integer((long long)v.as_tuple().size());
            if (v.is_map()) return Value::integer((long long)v.as_map().items.size());
            throw RuntimeError(ErrKind::TypeMismatch,
                               std::string(v.kind_name()) + " has no len()", sp);
        });
    if (name == "sum")
        return make("sum", [](Interp&, ValueList& a, Kwargs& kw, Span sp) {
            no_kwargs(kw, "sum", sp);
            methods::need_args(a, 1, 2, "sum", sp);
            Value acc = a.size() == 2 ? a[1] : Value::integer(0);
            for (const Value& v : Interp::iterable_items(a[0], sp)) {
                if (!v.is_number() || !acc.is_number())
                    throw RuntimeError(ErrKind::TypeMismatch, "sum() requires numbers",
                                       sp);
                if (acc.is_int() && v.is_int())
                    acc = Value::integer(acc.as_int() + v.as_int());
                else
                    acc = Value::real(acc.as_number() + v.as_number());
            }
            return acc;
        });
    if (name == "max" || name == "min") {
        bool is_max = name == "max";
        return make(name, [is_max, name](Interp& in, ValueList& a, Kwargs& kw, Span sp) {
            Value keyfn;
            for (auto& [k, v] : kw) {
                if (k != "key")
                    throw RuntimeError(ErrKind::TypeMismatch,
                                       name + "() got unexpected keyword argument '" + k +
                                           "'",
                                       sp);
                keyfn = v;
            }
            ValueList items;
            if (a.size() == 1)
                items = Interp::iterable_items(a[0], sp);
            else if (a.size() >= 2)
                items = a;
            if (items.empty())
                throw RuntimeError(ErrKind::TypeMismatch,
                                   name + "() of an empty sequence", sp);
            auto key_of = [&](const Value& v) {
                if (keyfn.is_none()) return v;
                ValueList ka{v};
                Kwargs kk;
                return in.call_value(keyfn, ka, kk, sp);
            };
            Value best = items[0];
            Value best_key = key_of(items[0]);
            for (size_t i = 1; i < items.size(); ++i) {
                Value k = key_of(items[i]);
                bool better = is_max ? value_less(best_key, k, sp)
                                     : value_less(k, best_key, sp);
                if (better) {  // strict: ties keep the first occurrence
                    best = items[i];
                    best_key = k;
                }
            }
            return best;
        });
    }
    if (name == "sorted")
        return make("sorted", [](Interp& in, ValueList& a, Kwargs& kw, Span sp) {
            methods::need_args(a, 1, 1, "sorted", sp);
            Value keyfn;
            bool reverse = false;
            for (auto& [k, v] : kw) {
                if (k == "key")
                    keyfn = v;
                else if (k == "reverse")
                    reverse = v.truthy();
                else
                    throw RuntimeError(ErrKind::TypeMismatch,
                                       "sorted() got unexpected keyword argument '" + k +
                                           "'",
                                       sp);
            }
            ValueList items = Interp::iterable_items(a[0], sp);
            std::vector<std::pair<Value, Value>> keyed;
            for (const Value& v : items) {
                Value k = v;
                if (!keyfn.is_none()) {
                    ValueList ka{v};
                    Kwargs kk;
                    k = in.call_value(keyfn, ka, kk, sp);
                }
                keyed.emplace_back(std::move(k), v);
            }
            std::stable_sort(keyed.begin(), keyed.end(),
                             [&](const auto& x, const auto& y) {
                                 return value_less(x.first, y.first, sp);
                             });
            if (reverse) std::reverse(keyed.begin(), keyed.end());
            ValueList out;
            for (auto& [k, v] : keyed) out.push_back(std::move(v));
            return Value::list(std::move(out));
        });
    if (name == "round")
        return make("round", [](Interp&, ValueList& a, Kwargs& kw, Span sp) {
            no_kwargs(kw, "round", sp);
            methods::need_args(a, 1, 2, "round", sp);
            bool have_nd = a.size() == 2;
            int nd = 0;
            if (have_nd) {
                if (!a[1].is_int())
                    throw RuntimeError(ErrKind::TypeMismatch,
                                       "round() ndigits must be an integer", sp);
                nd = a[1].as_int().convert_to<int>();
            }
            return round_value(a[0], nd, have_nd, sp);
        });
    if (name == "range")
        return make("range", [](Interp&, ValueList& a, Kwargs& kw, Span sp) {
            no_kwargs(kw, "range", sp);
            methods::need_args(a, 1, 3, "range", sp);
            long long start = 0, stop, stepv = 1;
            auto as_ll = [&](const Value& v) {
                if (!v.is_int())
                    throw RuntimeError(ErrKind::TypeMismatch,
                                       "range() requires integers", sp);
                return v.as_int().convert_to<long long>();
            };
            if (a.size() == 1) {
                stop = as_ll(a[0]);
            } else {
                start = as_ll(a[0]);
                stop = as_ll(a[1]);
                if (a.size() == 3) stepv = as_ll(a[2]);
            }
            if (stepv == 0)
                throw RuntimeError(ErrKind::TypeMismatch, "range() step must not be zero",
                                   sp);
            ValueList out;
            if (stepv > 0)
                for (long long i = start; i < stop; i += stepv)
                    out.push_back(Value::integer(i));
            else
                for (long long i = start; i > stop; i += stepv)
                    out.push_back(Value::integer(i));
            return Value::list(std::move(out));
        });
    if (name == "zip")
        return make("zip", [](Interp&, ValueList& a, Kwargs& kw, Span sp) {
            no_kwargs(kw, "zip", sp);
            std::vector<ValueList> seqs;
            size_t n = SIZE_MAX;
            for (const Value& v : a) {
                seqs.push_back(Interp::iterable_items(v, sp));
                n = std::min(n, seqs.back().size());
            }
            if (seqs.empty()) n = 0;
            ValueList out;
            for (size_t i = 0; i < n; ++i) {
                ValueList row;
                for (const auto& s : seqs) row.push_back(s[i]);
                out.push_back(Value::tuple(std::move(row)));
            }
            return Value::list(std::move(out));
        });
    if (name == "dict")
        return make("dict", [](Interp&, ValueList& a, Kwargs& kw, Span sp) {
            methods::need_args(a, 0, 1, "dict", sp);
            Value m = Value::map();
            if (a.size() == 1) {
                if (a[0].is_map()) {
                    for (const auto& [k, v] : a[0].as_map().items) m.as_map().set(k, v);
                } else {
                    for (const Value& pair : Interp::iterable_items(a[0], sp)) {
                        const ValueList* kv = nullptr;
                        if (pair.is_tuple())
                            kv = &pair.as_tuple();
                        else if (pair.is_list())
                            kv = &pair.as_list();
                        if (!kv || kv->size() != 2)
                            throw RuntimeError(ErrKind::TypeMismatch,
                                               "dict() requires (key, value) pairs", sp);
                        Interp::check_key_type((*kv)[0], sp);
                        m.as_map().set((*kv)[0], (*kv)[1]);
                    }
                }
            }
            for (auto& [k, v] : kw) m.as_map().set(Value::str(k), v);
            return m;
        });
    if (name == "list")
        return make("list", [](Interp&, ValueList& a, Kwargs& kw, Span sp) {
            no_kwargs(kw, "list", sp);
            methods::need_args(a, 0, 1, "list", sp);
            if (a.empty()) return Value::list({});
            return Value::list(Interp::iterable_items(a[0], sp));
        });
    if (name == "str")
        return make("str", [](Interp&, ValueList& a, Kwargs& kw, Span sp) {
            no_kwargs(kw, "str", sp);
            methods::need_args(a, 0, 1, "str", sp);
            return Value::str(a.empty() ? "" : str_render(a[0]));
        });
    if (name == "int")
        return make("int", [](Interp&, ValueList& a, Kwargs& kw, Span sp) {
            no_kwargs(kw, "int", sp);
            methods::need_args(a, 1, 1, "int", sp);
            return to_int(a[0], sp);
        });
    if (name == "float")
        return make("float", [](Interp&, ValueList& a, Kwargs& kw, Span sp) {
            no_kwargs(kw, "float", sp);
            methods::need_args(a, 1, 1, "float", sp);
            const Value& v = a[0];
            if (v.is_float()) return v;
            if (v.is_int()) return Value::real(v.as_number());
            if (v.is_str()) {
                try {
                    size_t used = 0;
                    std::string s = v.as_str();
                    double d = std::stod(s, &used);
                    while (used < s.size() && std::isspace((unsigned char)s[used])) used++;
                    if (used != s.size()) throw std::invalid_argument("trailing");
                    return Value::real(d);
                } catch (...) {
                    throw RuntimeError(ErrKind::TypeMismatch,
                                       "invalid float literal " + repr_string(v.as_str()),
                                       sp);
                }
            }
            throw RuntimeError(ErrKind::TypeMismatch,
                               std::string("cannot convert ") + v.kind_name() +
                                   " to float",
                               sp);
        });
    if (name == "Var")
        // Annotated value wrapper used in decomposition code; the annotation
        // only matters for prompt rendering, the value passes through.
        return make("Var", [](Interp&, ValueList& a, Kwargs& kw, Span sp) {
            no_kwargs(kw, "Var", sp);
            methods::need_args(a, 1, 2, "Var", sp);
            return a[0];
        });
    return Value::none();
}

}  // namespace builtins

// ---------------------------------------------------------------------------
// Entry points

inline EvalOutcome evaluate(const Program& program, const EnvPtr& env,
                            const HostRegistry& hosts, EvalLimits limits = {}) {
    Interp in(env, hosts, limits);
    return in.run(program);
}

inline EvalOutcome evaluate_source(const std::string& source, const EnvPtr& env,
                                   const HostRegistry& hosts, EvalLimits limits = {},
                                   BlockOrigin origin = BlockOrigin::Harness) {
    SourceBlock blk{source, origin};
    Program prog = parse(blk);
    return evaluate(prog, env, hosts, limits);
}

/// Renders an EvalOutcome as the observation text fed back to the model.
/// Truncation happens at line boundaries; the marker names the omitted
/// character count. Errors render as "Error(kind): message @ line:col".
inline std::string render_observation(const EvalOutcome& outcome, size_t char_budget) {
    char_budget = std::max<size_t>(char_budget, 64);
    if (outcome.error) {
        const EvalError& e = *outcome.error;
        return std::string("Error(") + err_kind_name(e.kind) + "): " + e.message + " @ " +
               span_str(e.span);
    }
    std::string body;
    for (size_t i = 0; i < outcome.printed.size(); ++i) {
        if (i) body += '\n';
        body += outcome.printed[i];
    }
    if (outcome.result && !outcome.result->is_none()) {
        if (!body.empty()) body += '\n';
        body += repr_render(*outcome.result);
    }
    if (body.empty()) return "(no output)";
    if (body.size() <= char_budget) return body;

    auto marker_for = [](size_t omitted) {
        return "\n[... " + std::to_string(omitted) + " chars omitted]";
    };
    std::vector<std::string> lines;
    size_t start = 0;
    while (start <= body.size()) {
        size_t nl = body.find('\n', start);
        if (nl == std::string::npos) {
            lines.push_back(body.substr(start));
            break;
        }
        lines.push_back(body.substr(start, nl - start));
        start = nl + 1;
    }
    std::string kept;
    for (const std::string& line : lines) {
        std::string candidate = kept.empty() ? line : kept + "\n" + line;
        std::string marker = marker_for(body.size() - candidate.size());
        if (candidate.size() + marker.size() <= char_budget)
            kept = candidate;
        else
            break;
    }
    if (kept.empty()) {
        // first line alone is over budget: hard cut inside the line
        size_t reserve = marker_for(body.size()).size() + 4;
        size_t take = char_budget > reserve ? char_budget - reserve : 0;
        kept = body.substr(0, take);
    }
    return kept + marker_for(body.size() - kept.size());
}

}  // namespace dolores
