#pragma once

#include <string>
#include <vector>

#include "dolores/errors.hpp"
#include "dolores/value.hpp"

namespace dolores {

enum class BlockOrigin { ModelTurn, Example, Harness };

/// One code block as emitted by a model turn, an example, or the harness.
struct SourceBlock {
    std::string text;
    BlockOrigin origin = BlockOrigin::Harness;
};

enum class TokKind {
    Name,
    Keyword,
    Int,
    Float,
    Str,
    FStr,
    Op,
    Newline,
    Indent,
    Dedent,
    End,
};

struct FStringPart {
    bool is_expr = false;
    std::string text;
    Span span;
};

struct Token {
    TokKind kind = TokKind::End;
    std::string text;  // op text, name, keyword
    Span span;
    BigInt int_val;
    double float_val = 0;
    std::string str_val;
    std::vector<FStringPart> parts;  // FStr only
};

namespace detail {

inline bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
inline bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

inline bool is_keyword(const std::string& s) {
    static const char* kw[] = {"for", "in",  "if",   "elif",  "else", "and",
                               "or",  "not", "True", "False", "None"};
    for (const char* k : kw)
        if (s == k) return true;
    return false;
}

}  // namespace detail

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) {}

    std::vector<Token> run() {
        tokens_.clear();
        indents_ = {0};
        pos_ = 0;
        line_ = 1;
        col_ = 1;
        at_line_start_ = true;
        paren_depth_ = 0;
        while (pos_ < src_.size()) {
            if (at_line_start_ && paren_depth_ == 0) {
                if (!handle_line_start()) break;
                continue;
            }
            lex_one();
        }
        if (!tokens_.empty() && tokens_.back().kind != TokKind::Newline)
            emit(TokKind::Newline, "");
        while (indents_.back() > 0) {
            indents_.pop_back();
            emit(TokKind::Dedent, "");
        }
        emit(TokKind::End, "");
        return tokens_;
    }

private:
    // Measures indentation; skips blank and comment-only lines. Returns
    // false at end of input.
    bool handle_line_start() {
        size_t start = pos_;
        int indent = 0;
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t')) {
            indent += src_[pos_] == '\t' ? 8 - indent % 8 : 1;
            advance();
        }
        if (pos_ >= src_.size()) return false;
        if (src_[pos_] == '\n') {
            advance();
            return true;
        }
        if (src_[pos_] == '#') {
            skip_comment();
            if (pos_ < src_.size()) advance();  // newline
            return true;
        }
        if (indent > indents_.back()) {
            indents_.push_back(indent);
            emit(TokKind::Indent, "");
        } else {
            while (indent < indents_.back()) {
                indents_.pop_back();
                emit(TokKind::Dedent, "");
            }
            if (indent != indents_.back())
                throw LexError("bad-indent", "inconsistent indentation",
                               {line_, 1 + int(pos_ - start)});
        }
        at_line_start_ = false;
        return true;
    }

    void lex_one() {
        char c = src_[pos_];
        if (c == '#') {
            skip_comment();
            return;
        }
        if (c == '\n') {
            if (paren_depth_ == 0) {
                emit(TokKind::Newline, "");
                at_line_start_ = true;
            }
            advance();
            return;
        }
        if (c == ' ' || c == '\t' || c == '\r') {
            advance();
            return;
        }
        if (c == '\\' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '\n') {
            advance();
            advance();
            return;
        }
        Span sp{line_, col_};
        if (detail::is_ident_start(c)) {
            std::string word;
            while (pos_ < src_.size() && detail::is_ident_char(src_[pos_])) {
                word += src_[pos_];
                advance();
            }
            if ((word == "f" || word == "F") && pos_ < src_.size() &&
                (src_[pos_] == '"' || src_[pos_] == '\'')) {
                lex_string(sp, true);
                return;
            }
            Token t;
            t.kind = detail::is_keyword(word) ? TokKind::Keyword : TokKind::Name;
            t.text = word;
            t.span = sp;
            tokens_.push_back(std::move(t));
            return;
        }
        if (detail::is_digit(c) || (c == '.' && pos_ + 1 < src_.size() &&
                                    detail::is_digit(src_[pos_ + 1]))) {
            lex_number(sp);
            return;
        }
        if (c == '"' || c == '\'') {
            lex_string(sp, false);
            return;
        }
        lex_op(sp);
    }

    void lex_number(Span sp) {
        std::string text;
        bool is_float = false;
        while (pos_ < src_.size() && detail::is_digit(src_[pos_])) {
            text += src_[pos_];
            advance();
        }
        if (pos_ < src_.size() && src_[pos_] == '.' &&
            !(pos_ + 1 < src_.size() && src_[pos_ + 1] == '.')) {
            // A trailing '.name' is attribute access, not a float.
            if (!(pos_ + 1 < src_.size() && detail::is_ident_start(src_[pos_ + 1]))) {
                is_float = true;
                text += '.';
                advance();
                while (pos_ < src_.size() && detail::is_digit(src_[pos_])) {
                    text += src_[pos_];
                    advance();
                }
            }
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            is_float = true;
            text += src_[pos_];
            advance();
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) {
                text += src_[pos_];
                advance();
            }
            while (pos_ < src_.size() && detail::is_digit(src_[pos_])) {
                text += src_[pos_];
                advance();
            }
        }
        Token t;
        t.span = sp;
        if (is_float) {
            t.kind = TokKind::Float;
            t.float_val = std::stod(text);
        } else {
            t.kind = TokKind::Int;
            t.int_val = BigInt(text);
        }
        t.text = text;
        tokens_.push_back(std::move(t));
    }

    void lex_string(Span sp, bool fstring) {
        char quote = src_[pos_];
        advance();
        bool triple = false;
        if (pos_ + 1 < src_.size() && src_[pos_] == quote && src_[pos_ + 1] == quote) {
            triple = true;
            advance();
            advance();
        }
        Token t;
        t.kind = fstring ? TokKind::FStr : TokKind::Str;
        t.span = sp;
        std::string lit;  // current literal chunk
        auto flush_lit = [&] {
            if (fstring) {
                if (!lit.empty()) {
                    FStringPart p;
                    p.text = lit;
                    t.parts.push_back(std::move(p));
                }
            } else {
                t.str_val += lit;
            }
            lit.clear();
        };
        while (true) {
            if (pos_ >= src_.size())
                throw LexError("unterminated-string", "unterminated string literal", sp);
            char c = src_[pos_];
            if (!triple && c == '\n')
                throw LexError("unterminated-string", "newline in string literal", sp);
            if (c == quote) {
                if (!triple) {
                    advance();
                    break;
                }
                if (pos_ + 2 < src_.size() + 1 && pos_ + 2 <= src_.size() &&
                    src_[pos_ + 1] == quote && pos_ + 2 < src_.size() &&
                    src_[pos_ + 2] == quote) {
                    advance();
                    advance();
                    advance();
                    break;
                }
                lit += c;
                advance();
                continue;
            }
            if (c == '\\') {
                advance();
                if (pos_ >= src_.size())
                    throw LexError("unterminated-string", "unterminated escape", sp);
                char e = src_[pos_];
                switch (e) {
                    case 'n': lit += '\n'; break;
                    case 't': lit += '\t'; break;
                    case 'r': lit += '\r'; break;
                    case '\\': lit += '\\'; break;
                    case '\'': lit += '\''; break;
                    case '"': lit += '"'; break;
                    case '\n': break;  // line continuation
                    default:
                        lit += '\\';
                        lit += e;
                }
                advance();
                continue;
            }
            if (fstring && c == '{') {
                if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '{') {
                    lit += '{';
                    advance();
                    advance();
                    continue;
                }
                flush_lit();
                Span esp{line_, col_ + 1};
                advance();
                std::string expr;
                int depth = 1;
                while (pos_ < src_.size()) {
                    char ec = src_[pos_];
                    if (ec == '{') depth++;
                    if (ec == '}') {
                        depth--;
                        if (depth == 0) break;
                    }
                    if (!triple && ec == '\n')
                        throw LexError("unterminated-string", "newline in string literal", sp);
                    expr += ec;
                    advance();
                }
                if (pos_ >= src_.size())
                    throw LexError("unterminated-string", "unterminated expression in string",
                                   sp);
                advance();  // '}'
                FStringPart p;
                p.is_expr = true;
                p.text = expr;
                p.span = esp;
                t.parts.push_back(std::move(p));
                continue;
            }
            if (fstring && c == '}') {
                if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '}') {
                    lit += '}';
                    advance();
                    advance();
                    continue;
                }
            }
            lit += c;
            advance();
        }
        flush_lit();
        tokens_.push_back(std::move(t));
    }

    void lex_op(Span sp) {
        static const char* two[] = {"==", "!=", "<=", ">=", "//"};
        char c = src_[pos_];
        if (pos_ + 1 < src_.size()) {
            std::string pair{c, src_[pos_ + 1]};
            for (const char* t : two) {
                if (pair == t) {
                    advance();
                    advance();
                    emit_at(TokKind::Op, pair, sp);
                    return;
                }
            }
        }
        static const std::string singles = "+-*/%=<>()[]{},.:";
        if (singles.find(c) == std::string::npos)
            throw LexError("illegal-character", std::string("illegal character '") + c + "'",
                           sp);
        if (c == '(' || c == '[' || c == '{') paren_depth_++;
        if (c == ')' || c == ']' || c == '}') paren_depth_--;
        advance();
        emit_at(TokKind::Op, std::string(1, c), sp);
    }

    void skip_comment() {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
    }

    void advance() {
        if (src_[pos_] == '\n') {
            line_++;
            col_ = 1;
        } else {
            col_++;
        }
        pos_++;
    }

    void emit(TokKind k, std::string text) { emit_at(k, std::move(text), {line_, col_}); }
    void emit_at(TokKind k, std::string text, Span sp) {
        Token t;
        t.kind = k;
        t.text = std::move(text);
        t.span = sp;
        tokens_.push_back(std::move(t));
    }

    const std::string& src_;
    std::vector<Token> tokens_;
    std::vector<int> indents_;
    size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
    bool at_line_start_ = true;
    int paren_depth_ = 0;
};

inline std::vector<Token> tokenize(const SourceBlock& source) {
    return Lexer(source.text).run();
}

}  // namespace dolores
