#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "dolores/errors.hpp"

namespace dolores {

using BigInt = boost::multiprecision::cpp_int;

class Value;
class Interp;

using ValueList = std::vector<Value>;
using Kwargs = std::vector<std::pair<std::string, Value>>;

/// Insertion-ordered map with string-or-number keys. Lookup is linear;
/// maps in this language stay small.
struct MapVal {
    std::vector<std::pair<Value, Value>> items;

    const Value* find(const Value& key) const;
    void set(const Value& key, const Value& val);
};

/// Opaque reference handed out by host functions; compares by identity.
struct HandleVal {
    std::string tag;
    std::uint64_t id = 0;
};

/// Builtins, host functions, and bound methods as first-class values.
struct CallableVal {
    std::string name;
    std::function<Value(Interp&, ValueList&, Kwargs&, Span)> fn;
};

class Value {
public:
    using Storage = std::variant<std::monostate, bool, BigInt, double, std::string,
                                 std::shared_ptr<ValueList>,        // list
                                 std::shared_ptr<const ValueList>,  // tuple
                                 std::shared_ptr<MapVal>, std::shared_ptr<HandleVal>,
                                 std::shared_ptr<CallableVal>>;

    Value() = default;
    static Value none() { return Value(); }
    static Value boolean(bool b) { return Value(Storage(b)); }
    static Value integer(BigInt i) { return Value(Storage(std::move(i))); }
    static Value integer(long long i) { return Value(Storage(BigInt(i))); }
    static Value real(double d) { return Value(Storage(d)); }
    static Value str(std::string s) { return Value(Storage(std::move(s))); }
    static Value list(ValueList items) {
        return Value(Storage(std::make_shared<ValueList>(std::move(items))));
    }
    static Value tuple(ValueList items) {
        return Value(Storage(std::shared_ptr<const ValueList>(
            std::make_shared<ValueList>(std::move(items)))));
    }
    static Value map() { return Value(Storage(std::make_shared<MapVal>())); }
    static Value map(std::shared_ptr<MapVal> m) { return Value(Storage(std::move(m))); }
    static Value handle(std::string tag, std::uint64_t id) {
        auto h = std::make_shared<HandleVal>();
        h->tag = std::move(tag);
        h->id = id;
        return Value(Storage(std::move(h)));
    }
    static Value callable(std::string name,
                          std::function<Value(Interp&, ValueList&, Kwargs&, Span)> fn) {
        auto c = std::make_shared<CallableVal>();
        c->name = std::move(name);
        c->fn = std::move(fn);
        return Value(Storage(std::move(c)));
    }

    bool is_none() const { return std::holds_alternative<std::monostate>(v_); }
    bool is_bool() const { return std::holds_alternative<bool>(v_); }
    bool is_int() const { return std::holds_alternative<BigInt>(v_); }
    bool is_float() const { return std::holds_alternative<double>(v_); }
    bool is_number() const { return is_int() || is_float(); }
    bool is_str() const { return std::holds_alternative<std::string>(v_); }
    bool is_list() const { return std::holds_alternative<std::shared_ptr<ValueList>>(v_); }
    bool is_tuple() const { return std::holds_alternative<std::shared_ptr<const ValueList>>(v_); }
    bool is_map() const { return std::holds_alternative<std::shared_ptr<MapVal>>(v_); }
    bool is_handle() const { return std::holds_alternative<std::shared_ptr<HandleVal>>(v_); }
    bool is_callable() const { return std::holds_alternative<std::shared_ptr<CallableVal>>(v_); }

    bool as_bool() const { return std::get<bool>(v_); }
    const BigInt& as_int() const { return std::get<BigInt>(v_); }
    double as_float() const { return std::get<double>(v_); }
    const std::string& as_str() const { return std::get<std::string>(v_); }
    ValueList& as_list() const { return *std::get<std::shared_ptr<ValueList>>(v_); }
    const ValueList& as_tuple() const { return *std::get<std::shared_ptr<const ValueList>>(v_); }
    MapVal& as_map() const { return *std::get<std::shared_ptr<MapVal>>(v_); }
    const HandleVal& as_handle() const { return *std::get<std::shared_ptr<HandleVal>>(v_); }
    const CallableVal& as_callable() const { return *std::get<std::shared_ptr<CallableVal>>(v_); }
    const std::shared_ptr<HandleVal>& handle_ptr() const {
        return std::get<std::shared_ptr<HandleVal>>(v_);
    }

    /// Numeric value widened to double (ints lose precision past 2^53).
    double as_number() const {
        return is_int() ? as_int().convert_to<double>() : as_float();
    }

    const char* kind_name() const {
        switch (v_.index()) {
            case 0: return "null";
            case 1: return "bool";
            case 2: return "int";
            case 3: return "float";
            case 4: return "str";
            case 5: return "list";
            case 6: return "tuple";
            case 7: return "map";
            case 8: return "handle";
            case 9: return "callable";
        }
        return "?";
    }

    bool truthy() const {
        if (is_none()) return false;
        if (is_bool()) return as_bool();
        if (is_int()) return as_int() != 0;
        if (is_float()) return as_float() != 0.0;
        if (is_str()) return !as_str().empty();
        if (is_list()) return !as_list().empty();
        if (is_tuple()) return !as_tuple().empty();
        if (is_map()) return !as_map().items.empty();
        return true;
    }

    bool operator==(const Value& o) const;
    bool operator!=(const Value& o) const { return !(*this == o); }

private:
    explicit Value(Storage v) : v_(std::move(v)) {}
    Storage v_;
};

inline const Value* MapVal::find(const Value& key) const {
    for (const auto& [k, v] : items)
        if (k == key) return &v;
    return nullptr;
}

inline void MapVal::set(const Value& key, const Value& val) {
    for (auto& [k, v] : items) {
        if (k == key) {
            v = val;
            return;
        }
    }
    items.emplace_back(key, val);
}

inline bool Value::operator==(const Value& o) const {
    // Numbers compare across int/float; handles by identity; everything
    // else structurally.
    if (is_number() && o.is_number()) {
        if (is_int() && o.is_int()) return as_int() == o.as_int();
        return as_number() == o.as_number();
    }
    if (v_.index() != o.v_.index()) return false;
    if (is_none()) return true;
    if (is_bool()) return as_bool() == o.as_bool();
    if (is_str()) return as_str() == o.as_str();
    if (is_list()) return as_list() == o.as_list();
    if (is_tuple()) return as_tuple() == o.as_tuple();
    if (is_map()) {
        const auto& a = as_map().items;
        const auto& b = o.as_map().items;
        if (a.size() != b.size()) return false;
        for (const auto& [k, v] : a) {
            const Value* ov = o.as_map().find(k);
            if (!ov || !(*ov == v)) return false;
        }
        return true;
    }
    if (is_handle()) return handle_ptr().get() == &o.as_handle();
    if (is_callable()) return &as_callable() == &o.as_callable();
    return false;
}

// ---------------------------------------------------------------------------
// Rendering

inline std::string render_float(double d) {
    if (std::isnan(d)) return "nan";
    if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), d);
    std::string s(buf, ptr);
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos)
        s += ".0";
    return s;
}

inline std::string repr_string(const std::string& s) {
    char quote = '\'';
    if (s.find('\'') != std::string::npos && s.find('"') == std::string::npos)
        quote = '"';
    std::string out(1, quote);
    for (char c : s) {
        if (c == '\\')
            out += "\\\\";
        else if (c == quote) {
            out += '\\';
            out += c;
        } else if (c == '\n')
            out += "\\n";
        else if (c == '\t')
            out += "\\t";
        else if (c == '\r')
            out += "\\r";
        else
            out += c;
    }
    out += quote;
    return out;
}

std::string repr_render(const Value& v);

/// str()-style rendering: strings appear raw, containers repr-style.
inline std::string str_render(const Value& v) {
    if (v.is_str()) return v.as_str();
    return repr_render(v);
}

inline std::string repr_render(const Value& v) {
    if (v.is_none()) return "None";
    if (v.is_bool()) return v.as_bool() ? "True" : "False";
    if (v.is_int()) return v.as_int().str();
    if (v.is_float()) return render_float(v.as_float());
    if (v.is_str()) return repr_string(v.as_str());
    if (v.is_list() || v.is_tuple()) {
        const ValueList& items = v.is_list() ? v.as_list() : v.as_tuple();
        std::string out = v.is_list() ? "[" : "(";
        for (size_t i = 0; i < items.size(); ++i) {
            if (i) out += ", ";
            out += repr_render(items[i]);
        }
        if (v.is_tuple() && items.size() == 1) out += ",";
        out += v.is_list() ? "]" : ")";
        return out;
    }
    if (v.is_map()) {
        std::string out = "{";
        bool first = true;
        for (const auto& [k, val] : v.as_map().items) {
            if (!first) out += ", ";
            first = false;
            out += repr_render(k) + ": " + repr_render(val);
        }
        out += "}";
        return out;
    }
    if (v.is_handle())
        return "<handle " + v.as_handle().tag + "#" + std::to_string(v.as_handle().id) + ">";
    return "<callable " + v.as_callable().name + ">";
}

/// Short type description for prompt variable docs.
inline std::string type_summary(const Value& v) { return v.kind_name(); }

}  // namespace dolores
