#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace semcodec::cli {

enum ExitCode : int { kSuccess = 0, kValidation = 1, kRuntime = 2 };

// Runs one command line (without the program name). Exit codes: 0 success,
// 1 invalid arguments or configuration, 2 runtime failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Relative paths that do not exist under the working directory are looked up
// under $SEMCODEC_HOME when it is set.
std::filesystem::path resolve_home_path(const std::filesystem::path& p);

}  // namespace semcodec::cli
