#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hotspots::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Parses `args` (without the program name) and dispatches one subcommand:
// synth, train, eval, hotspot, video-hotspot, cluster, report.
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hotspots::cli
