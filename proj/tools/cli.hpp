#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fcomb::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitValidation = 2;

/// args excludes the program name. Returns the process exit status.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fcomb::cli
