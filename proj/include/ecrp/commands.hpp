#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ecrp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitValidationFailed = 2;

// Parses arguments (without the program name) and runs one subcommand:
// fit, aggregate, forecast, validate, scenario, scr, synth.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ecrp::cli
