#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mfdr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

// Runs one invocation; args exclude the program name. Tables go to the
// --out file when given, otherwise to `out`; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// "model mFdr: 0.20"
std::string model_fdr_footer(double average);

}  // namespace mfdr::cli
