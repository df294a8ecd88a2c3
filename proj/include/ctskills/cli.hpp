#pragma once

// Operator entry point. Verbs: serve, score, analyze, simulate, validate,
// export. Exit codes: 0 success, 1 domain error, 2 input or parse error.

#include <iosfwd>
#include <string>
#include <vector>

namespace ctskills::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitInput = 2;

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ctskills::cli
