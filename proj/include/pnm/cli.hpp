#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pnm {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int task_failed = 1;
inline constexpr int usage = 2;
inline constexpr int internal = 3;
inline constexpr int bound = 4;
} // namespace exit_code

/// Entry point of the `pnm` tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

} // namespace pnm
