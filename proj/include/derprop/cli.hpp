#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace derprop {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerificationFailed = 1;
inline constexpr int kExitUsage = 2;

// args[0] is the program name. Returns the process exit code.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace derprop
