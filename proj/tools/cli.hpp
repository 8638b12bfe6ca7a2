// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace msplat::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2, kGradcheckFailed = 3 };

/// Runs the command line `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace msplat::cli
