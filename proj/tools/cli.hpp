#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hardness::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { ok = 0, internal = 1, input = 2, missing_artifact = 3, version_mismatch = 4 };

/// Runs one command line (without the program name) and returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hardness::cli
