#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>

#include "archer/classad/ad.hpp"
#include "archer/classad/expr.hpp"

namespace archer::classad {

namespace detail {

struct EvalCtx {
  const Ad* my;
  const Ad* other;
  // Attributes currently being resolved; re-entering one is a reference
  // cycle and evaluates to Undefined instead of recursing forever.
  std::set<std::pair<const Ad*, std::string>>* visiting;
};

inline Value eval_node(const ExprPtr& e, const EvalCtx& ctx);

inline Value resolve_attr(const Ad* owner, const Ad* opposite, const std::string& lowered,
                          const EvalCtx& ctx) {
  const ExprPtr* found = owner->lookup(lowered);
  if (!found) return Value::undefined();
  auto key = std::make_pair(owner, lowered);
  if (ctx.visiting->count(key)) return Value::undefined();
  ctx.visiting->insert(key);
  // An attribute's expression evaluates from its owning ad's point of view.
  EvalCtx inner{owner, opposite, ctx.visiting};
  Value v = eval_node(*found, inner);
  ctx.visiting->erase(key);
  return v;
}

inline Value numeric_binary(Op op, const Value& a, const Value& b) {
  if (a.kind() == Value::Kind::Integer && b.kind() == Value::Kind::Integer) {
    std::int64_t x = a.as_integer();
    std::int64_t y = b.as_integer();
    std::int64_t r = 0;
    switch (op) {
      case Op::Add:
        if (__builtin_add_overflow(x, y, &r)) return Value::undefined();
        return Value::integer(r);
      case Op::Sub:
        if (__builtin_sub_overflow(x, y, &r)) return Value::undefined();
        return Value::integer(r);
      case Op::Mul:
        if (__builtin_mul_overflow(x, y, &r)) return Value::undefined();
        return Value::integer(r);
      case Op::Div:
        if (y == 0) return Value::undefined();
        if (x == INT64_MIN && y == -1) return Value::undefined();
        return Value::integer(x / y);
      default:
        return Value::undefined();
    }
  }
  double x = a.numeric();
  double y = b.numeric();
  switch (op) {
    case Op::Add: return Value::real(x + y);
    case Op::Sub: return Value::real(x - y);
    case Op::Mul: return Value::real(x * y);
    case Op::Div:
      if (y == 0.0) return Value::undefined();
      return Value::real(x / y);
    default:
      return Value::undefined();
  }
}

inline Value compare(Op op, const Value& a, const Value& b) {
  if (a.is_numeric() && b.is_numeric()) {
    if (a.kind() == Value::Kind::Integer && b.kind() == Value::Kind::Integer) {
      std::int64_t x = a.as_integer();
      std::int64_t y = b.as_integer();
      switch (op) {
        case Op::Eq: return Value::boolean(x == y);
        case Op::Ne: return Value::boolean(x != y);
        case Op::Lt: return Value::boolean(x < y);
        case Op::Le: return Value::boolean(x <= y);
        case Op::Gt: return Value::boolean(x > y);
        case Op::Ge: return Value::boolean(x >= y);
        default: return Value::undefined();
      }
    }
    double x = a.numeric();
    double y = b.numeric();
    switch (op) {
      case Op::Eq: return Value::boolean(x == y);
      case Op::Ne: return Value::boolean(x != y);
      case Op::Lt: return Value::boolean(x < y);
      case Op::Le: return Value::boolean(x <= y);
      case Op::Gt: return Value::boolean(x > y);
      case Op::Ge: return Value::boolean(x >= y);
      default: return Value::undefined();
    }
  }
  if (a.kind() == Value::Kind::Text && b.kind() == Value::Kind::Text) {
    // Attribute names are case-insensitive; text values are not.
    int c = a.as_text().compare(b.as_text());
    switch (op) {
      case Op::Eq: return Value::boolean(c == 0);
      case Op::Ne: return Value::boolean(c != 0);
      case Op::Lt: return Value::boolean(c < 0);
      case Op::Le: return Value::boolean(c <= 0);
      case Op::Gt: return Value::boolean(c > 0);
      case Op::Ge: return Value::boolean(c >= 0);
      default: return Value::undefined();
    }
  }
  if (a.kind() == Value::Kind::Boolean && b.kind() == Value::Kind::Boolean) {
    // Equality only; ordering booleans is a type error.
    switch (op) {
      case Op::Eq: return Value::boolean(a.as_boolean() == b.as_boolean());
      case Op::Ne: return Value::boolean(a.as_boolean() != b.as_boolean());
      default: return Value::undefined();
    }
  }
  return Value::undefined();
}

inline Value eval_node(const ExprPtr& e, const EvalCtx& ctx) {
  switch (e->op) {
    case Op::Literal:
      return e->literal;
    case Op::Attr: {
      std::string lowered = ascii_lower(e->name);
      switch (e->scope) {
        case Scope::My:
          return resolve_attr(ctx.my, ctx.other, lowered, ctx);
        case Scope::Other:
          return resolve_attr(ctx.other, ctx.my, lowered, ctx);
        case Scope::Auto:
          // Bare names search the owning ad first, then the opposite side.
          if (ctx.my->lookup(lowered)) return resolve_attr(ctx.my, ctx.other, lowered, ctx);
          if (ctx.other->lookup(lowered)) return resolve_attr(ctx.other, ctx.my, lowered, ctx);
          return Value::undefined();
      }
      return Value::undefined();
    }
    case Op::Not: {
      Value v = eval_node(e->lhs, ctx);
      if (v.kind() != Value::Kind::Boolean) return Value::undefined();
      return Value::boolean(!v.as_boolean());
    }
    case Op::Neg: {
      Value v = eval_node(e->lhs, ctx);
      if (v.kind() == Value::Kind::Integer) {
        std::int64_t r = 0;
        if (__builtin_sub_overflow(std::int64_t{0}, v.as_integer(), &r)) return Value::undefined();
        return Value::integer(r);
      }
      if (v.kind() == Value::Kind::Real) return Value::real(-v.as_real());
      return Value::undefined();
    }
    case Op::And: {
      // Three-valued logic: a dominant false wins even against Undefined.
      Value a = eval_node(e->lhs, ctx);
      if (a.kind() == Value::Kind::Boolean && !a.as_boolean()) return Value::boolean(false);
      Value b = eval_node(e->rhs, ctx);
      if (b.kind() == Value::Kind::Boolean && !b.as_boolean()) return Value::boolean(false);
      if (a.kind() == Value::Kind::Boolean && b.kind() == Value::Kind::Boolean)
        return Value::boolean(true);
      return Value::undefined();
    }
    case Op::Or: {
      Value a = eval_node(e->lhs, ctx);
      if (a.kind() == Value::Kind::Boolean && a.as_boolean()) return Value::boolean(true);
      Value b = eval_node(e->rhs, ctx);
      if (b.kind() == Value::Kind::Boolean && b.as_boolean()) return Value::boolean(true);
      if (a.kind() == Value::Kind::Boolean && b.kind() == Value::Kind::Boolean)
        return Value::boolean(false);
      return Value::undefined();
    }
    case Op::Eq:
    case Op::Ne:
    case Op::Lt:
    case Op::Le:
    case Op::Gt:
    case Op::Ge:
      return compare(e->op, eval_node(e->lhs, ctx), eval_node(e->rhs, ctx));
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: {
      Value a = eval_node(e->lhs, ctx);
      Value b = eval_node(e->rhs, ctx);
      if (!a.is_numeric() || !b.is_numeric()) return Value::undefined();
      return numeric_binary(e->op, a, b);
    }
  }
  return Value::undefined();
}

}  // namespace detail

// Evaluates an expression against a pair of ads. Never throws: all faults
// (missing attributes, type errors, division by zero, overflow, reference
// cycles) collapse to Undefined.
inline Value evaluate(const ExprPtr& expr, const Ad& my, const Ad& other) {
  std::set<std::pair<const Ad*, std::string>> visiting;
  detail::EvalCtx ctx{&my, &other, &visiting};
  return detail::eval_node(expr, ctx);
}

}  // namespace archer::classad
