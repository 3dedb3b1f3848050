#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dolores/ast.hpp"
#include "dolores/lexer.hpp"

namespace dolores {

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    Program parse_program() {
        Program prog;
        skip_newlines();
        while (!at(TokKind::End)) {
            prog.statements.push_back(statement());
            skip_newlines();
        }
        return prog;
    }

    /// Parses a single expression, requiring all input to be consumed.
    ExprPtr parse_expression_only() {
        skip_newlines();
        ExprPtr e = expression();
        skip_newlines();
        if (!at(TokKind::End))
            throw SyntaxError("unexpected trailing input '" + cur().text + "'", cur().span);
        return e;
    }

private:
    // ---- statements ----

    StmtPtr statement() {
        if (at_keyword("for")) return for_stmt();
        if (at_keyword("if")) return if_stmt();
        return simple_stmt();
    }

    StmtPtr simple_stmt() {
        Span sp = cur().span;
        ExprPtr e = expression();
        if (at_op("=")) {
            if (e->kind != ExprKind::Name && e->kind != ExprKind::Subscript &&
                e->kind != ExprKind::Attribute)
                throw SyntaxError("invalid assignment target", e->span);
            advance();
            auto st = std::make_unique<Stmt>(StmtKind::Assign, sp);
            st->target = std::move(e);
            st->value = expression();
            end_of_stmt();
            return st;
        }
        auto st = std::make_unique<Stmt>(StmtKind::ExprStmt, sp);
        st->value = std::move(e);
        end_of_stmt();
        return st;
    }

    StmtPtr for_stmt() {
        Span sp = cur().span;
        advance();  // for
        auto st = std::make_unique<Stmt>(StmtKind::For, sp);
        st->names = target_list();
        expect_keyword("in");
        st->value = expression();
        st->body = suite();
        return st;
    }

    StmtPtr if_stmt() {
        Span sp = cur().span;
        advance();  // if
        auto st = std::make_unique<Stmt>(StmtKind::If, sp);
        IfBranch first;
        first.cond = expression();
        first.body = suite();
        st->branches.push_back(std::move(first));
        while (at_keyword("elif")) {
            advance();
            IfBranch br;
            br.cond = expression();
            br.body = suite();
            st->branches.push_back(std::move(br));
        }
        if (at_keyword("else")) {
            advance();
            IfBranch br;
            br.body = suite();
            st->branches.push_back(std::move(br));
        }
        return st;
    }

    std::vector<StmtPtr> suite() {
        expect_op(":");
        std::vector<StmtPtr> body;
        if (!at(TokKind::Newline)) {
            body.push_back(simple_stmt());
            return body;
        }
        advance();  // newline
        skip_newlines();
        if (!at(TokKind::Indent))
            throw SyntaxError("expected an indented block", cur().span);
        advance();
        skip_newlines();
        while (!at(TokKind::Dedent) && !at(TokKind::End)) {
            body.push_back(statement());
            skip_newlines();
        }
        if (at(TokKind::Dedent)) advance();
        return body;
    }

    std::vector<std::string> target_list() {
        std::vector<std::string> names;
        bool paren = at_op("(");
        if (paren) advance();
        names.push_back(expect_name());
        while (at_op(",")) {
            advance();
            names.push_back(expect_name());
        }
        if (paren) expect_op(")");
        return names;
    }

    void end_of_stmt() {
        if (at(TokKind::Newline)) {
            advance();
            return;
        }
        if (at(TokKind::End) || at(TokKind::Dedent)) return;
        throw SyntaxError("unexpected token '" + cur().text + "'", cur().span);
    }

    // ---- expressions ----

    ExprPtr expression() { return or_test(); }

    ExprPtr or_test() {
        ExprPtr e = and_test();
        while (at_keyword("or")) {
            Span sp = cur().span;
            advance();
            auto bin = std::make_unique<Expr>(ExprKind::Binary, sp);
            bin->str_val = "or";
            bin->a = std::move(e);
            bin->b = and_test();
            e = std::move(bin);
        }
        return e;
    }

    ExprPtr and_test() {
        ExprPtr e = not_test();
        while (at_keyword("and")) {
            Span sp = cur().span;
            advance();
            auto bin = std::make_unique<Expr>(ExprKind::Binary, sp);
            bin->str_val = "and";
            bin->a = std::move(e);
            bin->b = not_test();
            e = std::move(bin);
        }
        return e;
    }

    ExprPtr not_test() {
        if (at_keyword("not")) {
            Span sp = cur().span;
            advance();
            auto u = std::make_unique<Expr>(ExprKind::Unary, sp);
            u->str_val = "not";
            u->a = not_test();
            return u;
        }
        return comparison();
    }

    ExprPtr comparison() {
        ExprPtr e = arith();
        std::vector<std::string> ops;
        std::vector<ExprPtr> rhs;
        while (true) {
            std::string op;
            if (at_op("==") || at_op("!=") || at_op("<") || at_op("<=") || at_op(">") ||
                at_op(">=")) {
                op = cur().text;
                advance();
            } else if (at_keyword("in")) {
                op = "in";
                advance();
            } else if (at_keyword("not") && peek_keyword(1, "in")) {
                op = "not in";
                advance();
                advance();
            } else {
                break;
            }
            ops.push_back(op);
            rhs.push_back(arith());
        }
        if (ops.empty()) return e;
        auto cmp = std::make_unique<Expr>(ExprKind::Compare, e->span);
        cmp->a = std::move(e);
        cmp->strs = std::move(ops);
        cmp->items = std::move(rhs);
        return cmp;
    }

    ExprPtr arith() {
        ExprPtr e = term();
        while (at_op("+") || at_op("-")) {
            Span sp = cur().span;
            std::string op = cur().text;
            advance();
            auto bin = std::make_unique<Expr>(ExprKind::Binary, sp);
            bin->str_val = op;
            bin->a = std::move(e);
            bin->b = term();
            e = std::move(bin);
        }
        return e;
    }

    ExprPtr term() {
        ExprPtr e = factor();
        while (at_op("*") || at_op("/") || at_op("//") || at_op("%")) {
            Span sp = cur().span;
            std::string op = cur().text;
            advance();
            auto bin = std::make_unique<Expr>(ExprKind::Binary, sp);
            bin->str_val = op;
            bin->a = std::move(e);
            bin->b = factor();
            e = std::move(bin);
        }
        return e;
    }

    ExprPtr factor() {
        if (at_op("-") || at_op("+")) {
            Span sp = cur().span;
            std::string op = cur().text;
            advance();
            auto u = std::make_unique<Expr>(ExprKind::Unary, sp);
            u->str_val = op;
            u->a = factor();
            return u;
        }
        return postfix();
    }

    ExprPtr postfix() {
        ExprPtr e = atom();
        while (true) {
            if (at_op("(")) {
                e = call_trailer(std::move(e));
            } else if (at_op("[")) {
                e = subscript_trailer(std::move(e));
            } else if (at_op(".")) {
                Span sp = cur().span;
                advance();
                auto at_e = std::make_unique<Expr>(ExprKind::Attribute, sp);
                at_e->a = std::move(e);
                at_e->str_val = expect_name();
                e = std::move(at_e);
            } else {
                break;
            }
        }
        return e;
    }

    ExprPtr call_trailer(ExprPtr func) {
        Span sp = cur().span;
        advance();  // (
        auto call = std::make_unique<Expr>(ExprKind::Call, sp);
        call->a = std::move(func);
        bool seen_kwarg = false;
        while (!at_op(")")) {
            if (at(TokKind::Name) && peek_op(1, "=")) {
                std::string kw = cur().text;
                advance();
                advance();
                call->strs.push_back(kw);
                call->items.push_back(expression());
                seen_kwarg = true;
            } else {
                if (seen_kwarg)
                    throw SyntaxError("positional argument after keyword argument",
                                      cur().span);
                ExprPtr arg = expression();
                if (at_keyword("for") && call->items.empty()) {
                    call->items.push_back(comprehension_tail(std::move(arg), false, sp));
                    call->strs.push_back("");
                    break;
                }
                call->items.push_back(std::move(arg));
                call->strs.push_back("");
            }
            if (at_op(",")) {
                advance();
                continue;
            }
            break;
        }
        expect_op(")");
        return call;
    }

    ExprPtr subscript_trailer(ExprPtr obj) {
        Span sp = cur().span;
        advance();  // [
        ExprPtr lower, upper;
        bool is_slice = false;
        if (!at_op(":")) lower = expression();
        if (at_op(":")) {
            is_slice = true;
            advance();
            if (!at_op("]")) upper = expression();
        }
        expect_op("]");
        if (is_slice) {
            auto sl = std::make_unique<Expr>(ExprKind::Slice, sp);
            sl->a = std::move(obj);
            sl->b = std::move(lower);
            sl->c = std::move(upper);
            return sl;
        }
        auto sub = std::make_unique<Expr>(ExprKind::Subscript, sp);
        sub->a = std::move(obj);
        sub->b = std::move(lower);
        return sub;
    }

    ExprPtr comprehension_tail(ExprPtr element, bool list_comp, Span sp) {
        auto comp = std::make_unique<Expr>(ExprKind::Comprehension, sp);
        comp->a = std::move(element);
        comp->is_list_comp = list_comp;
        while (at_keyword("for")) {
            advance();
            CompClause cl;
            cl.targets = target_list();
            expect_keyword("in");
            cl.iter = or_test();
            while (at_keyword("if")) {
                advance();
                cl.ifs.push_back(or_test());
            }
            comp->clauses.push_back(std::move(cl));
        }
        return comp;
    }

    ExprPtr atom() {
        const Token& t = cur();
        Span sp = t.span;
        switch (t.kind) {
            case TokKind::Int: {
                auto e = std::make_unique<Expr>(ExprKind::IntLit, sp);
                e->int_val = t.int_val;
                advance();
                return e;
            }
            case TokKind::Float: {
                auto e = std::make_unique<Expr>(ExprKind::FloatLit, sp);
                e->float_val = t.float_val;
                advance();
                return e;
            }
            case TokKind::Str:
            case TokKind::FStr:
                return string_atom();
            case TokKind::Name: {
                auto e = std::make_unique<Expr>(ExprKind::Name, sp);
                e->str_val = t.text;
                advance();
                return e;
            }
            case TokKind::Keyword: {
                if (t.text == "True" || t.text == "False") {
                    auto e = std::make_unique<Expr>(ExprKind::BoolLit, sp);
                    e->bool_val = t.text == "True";
                    advance();
                    return e;
                }
                if (t.text == "None") {
                    advance();
                    return std::make_unique<Expr>(ExprKind::NoneLit, sp);
                }
                throw SyntaxError("unexpected keyword '" + t.text + "'", sp);
            }
            case TokKind::Op:
                if (t.text == "(") return paren_atom();
                if (t.text == "[") return list_atom();
                if (t.text == "{") return dict_atom();
                throw SyntaxError("unexpected token '" + t.text + "'", sp);
            default:
                throw SyntaxError("unexpected token '" + describe(t) + "'", sp);
        }
    }

    // Adjacent string literals concatenate; any f-string in the run makes
    // the whole run an interpolated literal.
    ExprPtr string_atom() {
        Span sp = cur().span;
        std::vector<FStringPiece> pieces;
        bool any_f = false;
        while (at(TokKind::Str) || at(TokKind::FStr)) {
            const Token& t = cur();
            if (t.kind == TokKind::Str) {
                FStringPiece p;
                p.text = t.str_val;
                pieces.push_back(std::move(p));
            } else {
                any_f = true;
                for (const FStringPart& part : t.parts) {
                    FStringPiece p;
                    if (part.is_expr) {
                        p.is_expr = true;
                        p.expr = parse_expr_source(part.text, part.span);
                    } else {
                        p.text = part.text;
                    }
                    pieces.push_back(std::move(p));
                }
            }
            advance();
        }
        if (!any_f) {
            auto e = std::make_unique<Expr>(ExprKind::StrLit, sp);
            for (const auto& p : pieces) e->str_val += p.text;
            return e;
        }
        auto e = std::make_unique<Expr>(ExprKind::FString, sp);
        e->pieces = std::move(pieces);
        return e;
    }

    ExprPtr paren_atom() {
        Span sp = cur().span;
        advance();  // (
        if (at_op(")")) {
            advance();
            return std::make_unique<Expr>(ExprKind::TupleLit, sp);
        }
        ExprPtr first = expression();
        if (at_keyword("for")) {
            ExprPtr comp = comprehension_tail(std::move(first), false, sp);
            expect_op(")");
            return comp;
        }
        if (at_op(",")) {
            auto tup = std::make_unique<Expr>(ExprKind::TupleLit, sp);
            tup->items.push_back(std::move(first));
            while (at_op(",")) {
                advance();
                if (at_op(")")) break;
                tup->items.push_back(expression());
            }
            expect_op(")");
            return tup;
        }
        expect_op(")");
        return first;
    }

    ExprPtr list_atom() {
        Span sp = cur().span;
        advance();  // [
        auto lst = std::make_unique<Expr>(ExprKind::ListLit, sp);
        if (at_op("]")) {
            advance();
            return lst;
        }
        ExprPtr first = expression();
        if (at_keyword("for")) {
            ExprPtr comp = comprehension_tail(std::move(first), true, sp);
            expect_op("]");
            return comp;
        }
        lst->items.push_back(std::move(first));
        while (at_op(",")) {
            advance();
            if (at_op("]")) break;
            lst->items.push_back(expression());
        }
        expect_op("]");
        return lst;
    }

    ExprPtr dict_atom() {
        Span sp = cur().span;
        advance();  // {
        auto d = std::make_unique<Expr>(ExprKind::DictLit, sp);
        while (!at_op("}")) {
            d->items.push_back(expression());  // key
            expect_op(":");
            d->items.push_back(expression());  // value
            if (at_op(",")) {
                advance();
                continue;
            }
            break;
        }
        expect_op("}");
        return d;
    }

    ExprPtr parse_expr_source(const std::string& text, Span base) {
        SourceBlock blk{text, BlockOrigin::Harness};
        Parser sub(tokenize(blk));
        try {
            ExprPtr e = sub.parse_expression_only();
            return e;
        } catch (const SyntaxError& e) {
            throw SyntaxError(std::string("in interpolated expression: ") + e.what(), base);
        }
    }

    // ---- token helpers ----

    const Token& cur() const { return toks_[idx_]; }
    void advance() {
        if (idx_ + 1 < toks_.size()) idx_++;
    }
    bool at(TokKind k) const { return cur().kind == k; }
    bool at_op(const std::string& s) const {
        return cur().kind == TokKind::Op && cur().text == s;
    }
    bool at_keyword(const std::string& s) const {
        return cur().kind == TokKind::Keyword && cur().text == s;
    }
    bool peek_op(size_t n, const std::string& s) const {
        return idx_ + n < toks_.size() && toks_[idx_ + n].kind == TokKind::Op &&
               toks_[idx_ + n].text == s;
    }
    bool peek_keyword(size_t n, const std::string& s) const {
        return idx_ + n < toks_.size() && toks_[idx_ + n].kind == TokKind::Keyword &&
               toks_[idx_ + n].text == s;
    }
    void expect_op(const std::string& s) {
        if (!at_op(s))
            throw SyntaxError("expected '" + s + "' but found '" + describe(cur()) + "'",
                              cur().span);
        advance();
    }
    void expect_keyword(const std::string& s) {
        if (!at_keyword(s))
            throw SyntaxError("expected '" + s + "' but found '" + describe(cur()) + "'",
                              cur().span);
        advance();
    }
    std::string expect_name() {
        if (!at(TokKind::Name))
            throw SyntaxError("expected a name but found '" + describe(cur()) + "'",
                              cur().span);
        std::string n = cur().text;
        advance();
        return n;
    }
    void skip_newlines() {
        while (at(TokKind::Newline)) advance();
    }
    static std::string describe(const Token& t) {
        switch (t.kind) {
            case TokKind::Newline: return "end of line";
            case TokKind::Indent: return "indent";
            case TokKind::Dedent: return "dedent";
            case TokKind::End: return "end of input";
            case TokKind::Str:
            case TokKind::FStr: return "string literal";
            default: return t.text;
        }
    }

    std::vector<Token> toks_;
    size_t idx_ = 0;
};

inline Program parse(const SourceBlock& source) {
    Parser p(tokenize(source));
    return p.parse_program();
}

}  // namespace dolores
