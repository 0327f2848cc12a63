#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace biasdef {

enum class ErrorKind {
  kUsage,
  kConfig,
  kDomain,
  kDegenerate,
  kNumeric,
  kGeneration,
  kParse,
  kSchema,
  kReference,
  kIo,
  kMetricUnavailable,
  kNoBoundary,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

std::string_view to_string(ErrorKind kind) noexcept;

// Process exit code for an error kind: 2 config/usage, 3 data, 4 numeric.
int exit_code(ErrorKind kind) noexcept;

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace biasdef
