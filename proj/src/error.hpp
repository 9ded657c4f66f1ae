#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace siv {

// Error classes map onto process exit codes at the CLI boundary:
// Config -> 2, everything else -> 3.
enum class ErrorCode {
  Config = 2,
  Numeric = 3,
  Invalid = 4,
  Io = 5,
};

class SivError : public std::runtime_error {
 public:
  SivError(ErrorCode code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void throw_config(std::string message) {
  throw SivError(ErrorCode::Config, std::move(message));
}

[[noreturn]] inline void throw_numeric(std::string message) {
  throw SivError(ErrorCode::Numeric, std::move(message));
}

[[noreturn]] inline void throw_invalid(std::string message) {
  throw SivError(ErrorCode::Invalid, std::move(message));
}

[[noreturn]] inline void throw_io(std::string message) {
  throw SivError(ErrorCode::Io, std::move(message));
}

}  // namespace siv
