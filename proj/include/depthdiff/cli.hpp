// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace depthdiff::cli {

/// Dispatches one subcommand. Exit codes: 0 success, 2 config error,
/// 3 missing input, 4 numerical failure, 1 other failure.
int run(int argc, const char* const* argv);

/// Convenience overload for tests; args exclude the program name.
int run(const std::vector<std::string>& args);

/// CLI and file-format reference page (also behind `show-config --reference`).
std::string reference_text();

}  // namespace depthdiff::cli
