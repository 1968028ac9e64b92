#pragma once

#include <stdexcept>
#include <string>

namespace bdtf {

// Domain error carrying a stable code ("InvalidSpan", "NoEol", ...) that tests and the CLI
// match on, plus a human-readable message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& msg)
      : std::runtime_error(code + ": " + msg), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

}  // namespace bdtf
