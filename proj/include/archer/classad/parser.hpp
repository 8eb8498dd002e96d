#pragma once

#include <cctype>
#include <charconv>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include "archer/classad/expr.hpp"

namespace archer::classad {

class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(std::string message, std::size_t position)
      : std::runtime_error(message + " at position " + std::to_string(position)),
        position_(position) {}

  // Byte offset into the source string, 0-based.
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

namespace detail {

inline std::string ascii_lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Recursive descent over the expression grammar:
//   or    := and ( '||' and )*
//   and   := cmp ( '&&' cmp )*
//   cmp   := sum ( ('=='|'!='|'<='|'>='|'<'|'>') sum )*
//   sum   := term ( ('+'|'-') term )*
//   term  := unary ( ('*'|'/') unary )*
//   unary := ('!'|'-') unary | primary
//   primary := literal | [scope '.'] name | '(' or ')'
class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  ExprPtr parse() {
    ExprPtr e = parse_or();
    skip_space();
    if (pos_ != src_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const { throw SyntaxError(message, pos_); }

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool consume(std::string_view token) {
    skip_space();
    if (src_.substr(pos_, token.size()) != token) return false;
    // '<' must not swallow the prefix of '<=' and friends.
    if ((token == "<" || token == ">") && pos_ + 1 < src_.size() && src_[pos_ + 1] == '=') return false;
    pos_ += token.size();
    return true;
  }

  ExprPtr parse_or() {
    ExprPtr e = parse_and();
    while (consume("||")) e = Expr::make_binary(Op::Or, e, parse_and());
    return e;
  }

  ExprPtr parse_and() {
    ExprPtr e = parse_cmp();
    while (consume("&&")) e = Expr::make_binary(Op::And, e, parse_cmp());
    return e;
  }

  ExprPtr parse_cmp() {
    ExprPtr e = parse_sum();
    for (;;) {
      if (consume("==")) e = Expr::make_binary(Op::Eq, e, parse_sum());
      else if (consume("!=")) e = Expr::make_binary(Op::Ne, e, parse_sum());
      else if (consume("<=")) e = Expr::make_binary(Op::Le, e, parse_sum());
      else if (consume(">=")) e = Expr::make_binary(Op::Ge, e, parse_sum());
      else if (consume("<")) e = Expr::make_binary(Op::Lt, e, parse_sum());
      else if (consume(">")) e = Expr::make_binary(Op::Gt, e, parse_sum());
      else return e;
    }
  }

  ExprPtr parse_sum() {
    ExprPtr e = parse_term();
    for (;;) {
      if (consume("+")) e = Expr::make_binary(Op::Add, e, parse_term());
      else if (consume("-")) e = Expr::make_binary(Op::Sub, e, parse_term());
      else return e;
    }
  }

  ExprPtr parse_term() {
    ExprPtr e = parse_unary();
    for (;;) {
      if (consume("*")) e = Expr::make_binary(Op::Mul, e, parse_unary());
      else if (consume("/")) e = Expr::make_binary(Op::Div, e, parse_unary());
      else return e;
    }
  }

  ExprPtr parse_unary() {
    skip_space();
    if (pos_ < src_.size() && src_[pos_] == '!') {
      if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '=') fail("unexpected operator");
      ++pos_;
      return Expr::make_unary(Op::Not, parse_unary());
    }
    if (pos_ < src_.size() && src_[pos_] == '-') {
      ++pos_;
      return Expr::make_unary(Op::Neg, parse_unary());
    }
    return parse_primary();
  }

  ExprPtr parse_primary() {
    skip_space();
    if (pos_ >= src_.size()) fail("expected expression");
    char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      ExprPtr e = parse_or();
      skip_space();
      if (pos_ >= src_.size() || src_[pos_] != ')') fail("expected ')'");
      ++pos_;
      return e;
    }
    if (c == '"') return parse_text();
    if (std::isdigit(static_cast<unsigned char>(c))) return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_name();
    fail("unexpected character");
  }

  ExprPtr parse_text() {
    ++pos_;  // opening quote
    std::string out;
    while (pos_ < src_.size() && src_[pos_] != '"') {
      char c = src_[pos_];
      if (c == '\\') {
        if (pos_ + 1 >= src_.size()) fail("unterminated escape");
        ++pos_;
        switch (src_[pos_]) {
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          default: fail("unknown escape");
        }
      } else {
        out += c;
      }
      ++pos_;
    }
    if (pos_ >= src_.size()) fail("unterminated string");
    ++pos_;  // closing quote
    return Expr::make_literal(Value::text(std::move(out)));
  }

  ExprPtr parse_number() {
    std::size_t start = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    bool real = false;
    if (pos_ < src_.size() && src_[pos_] == '.') {
      real = true;
      ++pos_;
      if (pos_ >= src_.size() || !std::isdigit(static_cast<unsigned char>(src_[pos_])))
        fail("expected digits after decimal point");
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      real = true;
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ >= src_.size() || !std::isdigit(static_cast<unsigned char>(src_[pos_])))
        fail("expected exponent digits");
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    std::string_view token = src_.substr(start, pos_ - start);
    if (real) {
      double d = 0.0;
      auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), d);
      if (ec != std::errc() || ptr != token.data() + token.size()) {
        pos_ = start;
        fail("malformed real literal");
      }
      return Expr::make_literal(Value::real(d));
    }
    std::int64_t i = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), i);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      pos_ = start;
      fail("integer literal out of range");
    }
    return Expr::make_literal(Value::integer(i));
  }

  ExprPtr parse_name() {
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
      ++pos_;
    }
    std::string word(src_.substr(start, pos_ - start));
    std::string lower = ascii_lower(word);
    if (lower == "true") return Expr::make_literal(Value::boolean(true));
    if (lower == "false") return Expr::make_literal(Value::boolean(false));
    if (lower == "undefined") return Expr::make_literal(Value::undefined());
    if (lower == "my" || lower == "other") {
      if (pos_ >= src_.size() || src_[pos_] != '.') fail("expected '.' after scope name");
      ++pos_;
      if (pos_ >= src_.size() ||
          !(std::isalpha(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        fail("expected attribute name");
      }
      std::size_t attr_start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        ++pos_;
      }
      return Expr::make_attr(lower == "my" ? Scope::My : Scope::Other,
                             std::string(src_.substr(attr_start, pos_ - attr_start)));
    }
    return Expr::make_attr(Scope::Auto, std::move(word));
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline ExprPtr parse_expr(std::string_view src) { return detail::Parser(src).parse(); }

}  // namespace archer::classad
