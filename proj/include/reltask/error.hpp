#pragma once

#include <stdexcept>
#include <string>

namespace reltask {

// Error taxonomy shared by the whole library and mirrored by the C API codes.
enum class ErrorKind {
  kArgument,    // bad call-site argument
  kDimension,   // tensor shape mismatch
  kContract,    // API contract violated (e.g. backward called twice)
  kValidation,  // task/config fails validation
  kSingular,    // matrix not SPD / singular where it must not be
  kDivergence,  // training diverged
  kIo,          // file read/write failure
  kInternal,    // should-not-happen
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace reltask
