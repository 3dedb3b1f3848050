#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dolores/errors.hpp"
#include "dolores/value.hpp"

namespace dolores {

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

enum class ExprKind {
    NoneLit,
    BoolLit,
    IntLit,
    FloatLit,
    StrLit,
    FString,
    Name,
    ListLit,
    TupleLit,
    DictLit,
    Unary,     // op: "-" "+" "not"
    Binary,    // op: + - * / // % and or
    Compare,   // chained: left (op right)+
    Call,
    Attribute,
    Subscript,
    Slice,
    Comprehension,  // list or generator
};

struct CompClause {
    std::vector<std::string> targets;  // unpacking head: one or more names
    ExprPtr iter;
    std::vector<ExprPtr> ifs;
};

struct FStringPiece {
    bool is_expr = false;
    std::string text;  // literal text
    ExprPtr expr;      // when is_expr
};

struct Expr {
    ExprKind kind;
    Span span;

    bool bool_val = false;
    BigInt int_val;
    double float_val = 0;
    std::string str_val;  // StrLit text, Name id, Attribute name, op text

    ExprPtr a, b, c;                  // operands / object / lower / upper
    std::vector<ExprPtr> items;       // list/tuple elems, call args, compare rhs, dict keys+vals
    std::vector<std::string> strs;    // compare ops, call kwarg names
    std::vector<FStringPiece> pieces; // FString
    std::vector<CompClause> clauses;  // Comprehension
    bool is_list_comp = false;

    explicit Expr(ExprKind k, Span sp) : kind(k), span(sp) {}
};

struct Stmt;
using StmtPtr = std::unique_ptr<Stmt>;

enum class StmtKind { ExprStmt, Assign, For, If };

struct IfBranch {
    ExprPtr cond;  // null for else
    std::vector<StmtPtr> body;
};

struct Stmt {
    StmtKind kind;
    Span span;

    ExprPtr target;  // Assign lhs (Name/Subscript/Attribute)
    ExprPtr value;   // Assign rhs, ExprStmt expr, For iterable
    std::vector<std::string> names;  // For loop targets
    std::vector<StmtPtr> body;       // For body
    std::vector<IfBranch> branches;  // If

    explicit Stmt(StmtKind k, Span sp) : kind(k), span(sp) {}
};

/// A parsed code block; statements execute in order.
struct Program {
    std::vector<StmtPtr> statements;
};

}  // namespace dolores
