#pragma once

// Command-line front end. Kept in a library so tests can drive it in-process.

#include <iosfwd>
#include <string>
#include <vector>

namespace hfsel::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kData = 3,
  kHierarchy = 4,
  kTraining = 5,
};

// args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hfsel::cli
