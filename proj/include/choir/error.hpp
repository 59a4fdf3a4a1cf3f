#pragma once

#include <stdexcept>
#include <string>

namespace choir {

enum class ErrorCode {
  InvalidArgument,
  DegenerateInput,
  IsolatedVertex,
  NonFinite,
  MissingField,
  LengthMismatch,
  Malformed,
  UnsupportedVersion,
  NotPositiveDefinite,
  ModeMismatch,
  Io,
};

class Error : public std::runtime_error
{
public:
  Error(ErrorCode code, std::string const &what)
    : std::runtime_error(what)
    , code_(code)
  {
  }

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, std::string const &what) { throw Error(code, what); }

} // namespace choir
