#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ehrsum::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitUsage = 2;

// Entry point of the `ehrsum` tool. args[0] is the program name.
//   convert <table> -o <squad.json>
//   split <squad.json> --seed N -o <dir>
//   evaluate <squad.json> --backend <kind|url> [--strict] -o <report>
//   serve --backend <kind|url> --port P
//   report <report.json> --format table
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ehrsum::cli
