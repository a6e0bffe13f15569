#pragma once

#include <stdexcept>
#include <string>

namespace lrc {

/// Failure categories. The C API maps these one-to-one onto lrc_status.
enum class ErrorCode {
  invalid_argument = 1,
  io = 2,
  format = 3,
  checksum_mismatch = 4,
  truncated_blob = 5,
  unknown_kind = 6,
  version_skew = 7,
  numeric = 8,
};

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorCode::invalid_argument, message);
}

} // namespace lrc
