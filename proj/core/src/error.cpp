#include "biasdef/error.hpp"

namespace biasdef {

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kUsage: return "usage";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kDomain: return "domain";
    case ErrorKind::kDegenerate: return "degenerate";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kGeneration: return "generation";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kSchema: return "schema";
    case ErrorKind::kReference: return "reference";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kMetricUnavailable: return "metric-unavailable";
    case ErrorKind::kNoBoundary: return "no-boundary";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kUsage:
    case ErrorKind::kConfig:
      return 2;
    case ErrorKind::kParse:
    case ErrorKind::kSchema:
    case ErrorKind::kReference:
    case ErrorKind::kIo:
    case ErrorKind::kMetricUnavailable:
      return 3;
    case ErrorKind::kDomain:
    case ErrorKind::kDegenerate:
    case ErrorKind::kNumeric:
    case ErrorKind::kGeneration:
    case ErrorKind::kNoBoundary:
      return 4;
  }
  return 1;
}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace biasdef
