#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>

namespace archer::classad {

// Runtime value of the ad expression language. Undefined is a first-class
// citizen: every type error, missing attribute, or arithmetic fault folds
// into it rather than raising.
class Value {
 public:
  enum class Kind { Boolean, Integer, Real, Text, Undefined };

  Value() : kind_(Kind::Undefined) {}

  static Value boolean(bool b) { return Value(Kind::Boolean, b); }
  static Value integer(std::int64_t i) { return Value(Kind::Integer, i); }
  static Value real(double d) { return Value(Kind::Real, d); }
  static Value text(std::string s) { return Value(Kind::Text, std::move(s)); }
  static Value undefined() { return Value(); }

  Kind kind() const { return kind_; }
  bool is_undefined() const { return kind_ == Kind::Undefined; }
  bool is_numeric() const { return kind_ == Kind::Integer || kind_ == Kind::Real; }

  bool as_boolean() const { return std::get<bool>(data_); }
  std::int64_t as_integer() const { return std::get<std::int64_t>(data_); }
  double as_real() const { return std::get<double>(data_); }
  const std::string& as_text() const { return std::get<std::string>(data_); }

  // The match rule: only a literal Boolean true counts.
  bool is_true() const { return kind_ == Kind::Boolean && as_boolean(); }

  double numeric() const { return kind_ == Kind::Integer ? static_cast<double>(as_integer()) : as_real(); }

  friend bool operator==(const Value& a, const Value& b) {
    if (a.kind_ != b.kind_) return false;
    return a.data_ == b.data_;
  }

 private:
  Value(Kind kind, std::variant<std::monostate, bool, std::int64_t, double, std::string> data)
      : kind_(kind), data_(std::move(data)) {}

  Kind kind_;
  std::variant<std::monostate, bool, std::int64_t, double, std::string> data_;
};

}  // namespace archer::classad
