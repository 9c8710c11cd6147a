// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DEREVERB_TOOLS_CLI_H_
#define DEREVERB_TOOLS_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace dereverb::tool {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitVerification = 3;

// Runs one subcommand. args excludes the program name. Results go to `out`;
// diagnostics go to `err` and to the library log (stderr).
int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace dereverb::tool

#endif  // DEREVERB_TOOLS_CLI_H_
