#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace owlkit {

enum class ErrorKind {
  Argument,     // caller passed an invalid value
  Config,       // configuration file or option problem
  Format,       // malformed on-disk file
  Consistency,  // related inputs disagree (e.g. features vs labels length)
  Data,         // data content violates an invariant
  Shape,        // dimension mismatch
  Io,           // filesystem failure
  Version,      // state directory missing or from another version
  State,        // operation called in the wrong state
  Numeric,      // numerical failure (e.g. non positive-definite matrix)
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  /// Message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

private:
  ErrorKind kind_;
  std::string detail_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

} // namespace owlkit
