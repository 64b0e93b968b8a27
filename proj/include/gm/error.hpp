#pragma once

#include <stdexcept>
#include <string>

namespace gm {

// Error taxonomy shared by the library and the CLI exit-code mapping.
enum class ErrorKind {
  ShapeMismatch,    // tensor extents disagree
  InvalidArgument,  // bad parameter value (usage-class)
  BadMagic,         // file does not start with the expected magic
  Truncated,        // file too short to hold its own header
  SizeMismatch,     // header-declared payload size != actual payload
  SplitError,       // stratified split preconditions violated
  NonFinite,        // NaN/Inf encountered where values must be finite
  IoError,          // file could not be opened/read/written
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

}  // namespace gm
