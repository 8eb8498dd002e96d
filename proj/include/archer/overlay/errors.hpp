#pragma once

#include <stdexcept>
#include <string>

namespace archer::overlay {

enum class OverlayErrc {
  join_failed,
  unknown_node,
  no_route_to_host,
  uncertified_endpoint,
  delivery_timeout,
};

inline const char* to_string(OverlayErrc e) {
  switch (e) {
    case OverlayErrc::join_failed: return "join failed";
    case OverlayErrc::unknown_node: return "unknown node";
    case OverlayErrc::no_route_to_host: return "no route to host";
    case OverlayErrc::uncertified_endpoint: return "uncertified endpoint";
    case OverlayErrc::delivery_timeout: return "delivery timeout";
  }
  return "unknown";
}

class OverlayError : public std::runtime_error {
 public:
  OverlayError(OverlayErrc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  OverlayErrc code() const { return code_; }

 private:
  OverlayErrc code_;
};

}  // namespace archer::overlay
