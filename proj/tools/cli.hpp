#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gmmcache::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kData = 2;
inline constexpr int kNumeric = 3;

// Entry point behind the `gmmcache` binary. `args` excludes the program
// name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gmmcache::cli
