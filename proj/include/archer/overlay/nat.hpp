#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace archer::overlay {

enum class NatClass { Public, Cone, Symmetric };

enum class LinkKind { Direct, Relayed };

// Deterministic reachability policy. Hole punching succeeds between cone NATs
// and anything involving a public endpoint; a symmetric NAT on either side
// forces ring relaying unless the other side is public.
constexpr LinkKind link_allowed(NatClass a, NatClass b) {
  if (a == NatClass::Public || b == NatClass::Public) return LinkKind::Direct;
  if (a == NatClass::Cone && b == NatClass::Cone) return LinkKind::Direct;
  return LinkKind::Relayed;
}

constexpr std::string_view to_string(NatClass n) {
  switch (n) {
    case NatClass::Public: return "public";
    case NatClass::Cone: return "cone";
    case NatClass::Symmetric: return "symmetric";
  }
  return "public";
}

inline std::optional<NatClass> nat_from_string(std::string_view s) {
  if (s == "public") return NatClass::Public;
  if (s == "cone") return NatClass::Cone;
  if (s == "symmetric") return NatClass::Symmetric;
  return std::nullopt;
}

}  // namespace archer::overlay
