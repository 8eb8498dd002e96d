#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "archer/classad/expr.hpp"
#include "archer/classad/parser.hpp"

namespace archer::classad {

enum class AdKind { Job, Resource };

// Attribute list with case-insensitive names and stable insertion order.
// An attribute holds either a literal value or an unevaluated expression.
class Ad {
 public:
  struct Entry {
    std::string name;  // as first written
    ExprPtr expr;      // literals are stored as literal expressions
  };

  explicit Ad(AdKind kind = AdKind::Job) : kind_(kind) {}

  AdKind kind() const { return kind_; }
  void set_kind(AdKind kind) { kind_ = kind; }

  void set(std::string_view name, Value v) { set_expr(name, Expr::make_literal(std::move(v))); }

  void set_expr(std::string_view name, ExprPtr e) {
    std::string key = detail::ascii_lower(name);
    for (auto& entry : entries_) {
      if (detail::ascii_lower(entry.name) == key) {
        entry.expr = std::move(e);
        return;
      }
    }
    entries_.push_back(Entry{std::string(name), std::move(e)});
  }

  void set_expr(std::string_view name, std::string_view source) {
    set_expr(name, parse_expr(source));
  }

  const ExprPtr* lookup(std::string_view name) const {
    std::string key = detail::ascii_lower(name);
    for (const auto& entry : entries_) {
      if (detail::ascii_lower(entry.name) == key) return &entry.expr;
    }
    return nullptr;
  }

  bool has(std::string_view name) const { return lookup(name) != nullptr; }

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  // File format: a JSON object mapping attribute names to literals; string
  // values beginning with "expr:" hold expression source instead of text.
  static Ad from_json(const nlohmann::ordered_json& doc, AdKind kind = AdKind::Job) {
    if (!doc.is_object()) throw std::runtime_error("ad file must be a JSON object");
    Ad ad(kind);
    for (const auto& [name, value] : doc.items()) {
      if (value.is_boolean()) {
        ad.set(name, Value::boolean(value.get<bool>()));
      } else if (value.is_number_integer()) {
        ad.set(name, Value::integer(value.get<std::int64_t>()));
      } else if (value.is_number_float()) {
        ad.set(name, Value::real(value.get<double>()));
      } else if (value.is_string()) {
        auto s = value.get<std::string>();
        if (s.rfind("expr:", 0) == 0) {
          ad.set_expr(name, std::string_view(s).substr(5));
        } else {
          ad.set(name, Value::text(std::move(s)));
        }
      } else if (value.is_null()) {
        ad.set(name, Value::undefined());
      } else {
        throw std::runtime_error("attribute '" + name + "' has unsupported JSON type");
      }
    }
    return ad;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    for (const auto& entry : entries_) {
      if (entry.expr->op == Op::Literal) {
        const Value& v = entry.expr->literal;
        switch (v.kind()) {
          case Value::Kind::Boolean: doc[entry.name] = v.as_boolean(); break;
          case Value::Kind::Integer: doc[entry.name] = v.as_integer(); break;
          case Value::Kind::Real: doc[entry.name] = v.as_real(); break;
          case Value::Kind::Text:
            // Text that itself starts with the expression marker must be
            // written as a quoted expression or it would re-read as one.
            if (v.as_text().rfind("expr:", 0) == 0) {
              doc[entry.name] = "expr:" + print_value(v);
            } else {
              doc[entry.name] = v.as_text();
            }
            break;
          case Value::Kind::Undefined: doc[entry.name] = nullptr; break;
        }
      } else {
        doc[entry.name] = "expr:" + print_expr(entry.expr);
      }
    }
    return doc;
  }

 private:
  AdKind kind_;
  std::vector<Entry> entries_;
};

}  // namespace archer::classad
