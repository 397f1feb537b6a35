#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace elcd::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,      // bad flags, bad config, unreadable or malformed input
    kNumerical = 2,  // divergence, singular matrix, non-finite loss
    kVerifyFailed = 3,
};

/// Runs one command. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace elcd::cli
