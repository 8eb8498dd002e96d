#pragma once

#include <charconv>
#include <memory>
#include <string>
#include <utility>

#include "archer/classad/value.hpp"

namespace archer::classad {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class Op {
  Literal,
  Attr,
  Not,
  Neg,
  And,
  Or,
  Eq,
  Ne,
  Lt,
  Le,
  Gt,
  Ge,
  Add,
  Sub,
  Mul,
  Div,
};

// Attribute references carry an explicit scope: bare names search the owning
// ad first and fall back to the opposite side.
enum class Scope { Auto, My, Other };

struct Expr {
  Op op = Op::Literal;
  Value literal;
  Scope scope = Scope::Auto;
  std::string name;
  ExprPtr lhs;
  ExprPtr rhs;

  static ExprPtr make_literal(Value v) {
    auto e = std::make_shared<Expr>();
    e->op = Op::Literal;
    e->literal = std::move(v);
    return e;
  }

  static ExprPtr make_attr(Scope scope, std::string name) {
    auto e = std::make_shared<Expr>();
    e->op = Op::Attr;
    e->scope = scope;
    e->name = std::move(name);
    return e;
  }

  static ExprPtr make_unary(Op op, ExprPtr operand) {
    auto e = std::make_shared<Expr>();
    e->op = op;
    e->lhs = std::move(operand);
    return e;
  }

  static ExprPtr make_binary(Op op, ExprPtr lhs, ExprPtr rhs) {
    auto e = std::make_shared<Expr>();
    e->op = op;
    e->lhs = std::move(lhs);
    e->rhs = std::move(rhs);
    return e;
  }
};

inline bool is_binary(Op op) { return op >= Op::And; }

inline const char* op_token(Op op) {
  switch (op) {
    case Op::And: return "&&";
    case Op::Or: return "||";
    case Op::Eq: return "==";
    case Op::Ne: return "!=";
    case Op::Lt: return "<";
    case Op::Le: return "<=";
    case Op::Gt: return ">";
    case Op::Ge: return ">=";
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Div: return "/";
    case Op::Not: return "!";
    case Op::Neg: return "-";
    default: return "?";
  }
}

inline std::string print_value(const Value& v) {
  switch (v.kind()) {
    case Value::Kind::Boolean:
      return v.as_boolean() ? "true" : "false";
    case Value::Kind::Integer:
      return std::to_string(v.as_integer());
    case Value::Kind::Real: {
      char buf[64];
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v.as_real());
      std::string s(buf, end);
      // Reals must never print as bare integers or they change type on re-parse.
      if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
          s.find("inf") == std::string::npos && s.find("nan") == std::string::npos) {
        s += ".0";
      }
      return s;
    }
    case Value::Kind::Text: {
      std::string out = "\"";
      for (char c : v.as_text()) {
        switch (c) {
          case '"': out += "\\\""; break;
          case '\\': out += "\\\\"; break;
          case '\n': out += "\\n"; break;
          case '\t': out += "\\t"; break;
          default: out += c;
        }
      }
      out += '"';
      return out;
    }
    case Value::Kind::Undefined:
      return "undefined";
  }
  return "undefined";
}

// Canonical form: every compound node fully parenthesized, single spaces
// around binary operators. parse(print(e)) reproduces e exactly.
inline std::string print_expr(const ExprPtr& e) {
  switch (e->op) {
    case Op::Literal:
      return print_value(e->literal);
    case Op::Attr:
      switch (e->scope) {
        case Scope::My: return "my." + e->name;
        case Scope::Other: return "other." + e->name;
        default: return e->name;
      }
    case Op::Not:
      return "!" + print_expr(e->lhs);
    case Op::Neg:
      return "-" + print_expr(e->lhs);
    default:
      return "(" + print_expr(e->lhs) + " " + op_token(e->op) + " " + print_expr(e->rhs) + ")";
  }
}

inline bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->op != b->op) return false;
  switch (a->op) {
    case Op::Literal:
      return a->literal == b->literal;
    case Op::Attr:
      return a->scope == b->scope && a->name == b->name;
    case Op::Not:
    case Op::Neg:
      return expr_equal(a->lhs, b->lhs);
    default:
      return expr_equal(a->lhs, b->lhs) && expr_equal(a->rhs, b->rhs);
  }
}

}  // namespace archer::classad
