// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nlfv::cli {

/// Runs the command line with explicit streams. Returns the process exit code:
/// 0 success, 2 usage/config/input error, 1 runtime fault.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace nlfv::cli
