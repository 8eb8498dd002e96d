#pragma once

#include <stdexcept>
#include <string>

namespace archer::secnet {

enum class SecnetErrc {
  certificate_invalid,
  identity_mismatch,
  authentication_failed,
  replay_detected,
  malformed_frame,
};

inline const char* to_string(SecnetErrc e) {
  switch (e) {
    case SecnetErrc::certificate_invalid: return "certificate invalid";
    case SecnetErrc::identity_mismatch: return "identity mismatch";
    case SecnetErrc::authentication_failed: return "authentication failed";
    case SecnetErrc::replay_detected: return "replay detected";
    case SecnetErrc::malformed_frame: return "malformed frame";
  }
  return "unknown";
}

class SecnetError : public std::runtime_error {
 public:
  SecnetError(SecnetErrc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  SecnetErrc code() const { return code_; }

 private:
  SecnetErrc code_;
};

}  // namespace archer::secnet
