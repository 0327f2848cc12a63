#pragma once

#include <iosfwd>

namespace biasdef::cli {

inline constexpr const char* kOutDirEnv = "BIASDEF_OUT_DIR";

// Runs one invocation; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace biasdef::cli
