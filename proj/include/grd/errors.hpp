#pragma once

#include <stdexcept>
#include <string>

namespace grd {

/// Broad failure categories; the CLI maps each to a distinct exit code.
enum class ErrorKind {
  invalid_argument,  // bad parameters or inconsistent inputs
  structural,        // malformed data (shape mismatch, non-finite values)
  axis_mismatch,     // cross-grid operation on differing axes
  domain,            // evaluation outside a function's domain
  solver,            // optimizer did not reach the requested tolerances
  io,                // filesystem failures
  parse,             // unreadable or schema-violating input files
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace grd
