#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "cvrank/engine.hpp"
#include "cvrank/error.hpp"

namespace cvrank {

/// Process exit codes; stable across releases.
enum ExitCode : int {
  kExitOk = 0,
  kExitIo = 1,
  kExitData = 2,
  kExitMethod = 3,
  kExitUsage = 64,
};

int exit_code_for(Errc code) noexcept;

/// Applies `key = value` lines ('#' comments allowed) to a CycleConfig.
/// Keys are the CycleConfig field names. Throws Error{InvalidArgument} for an
/// unknown key or a bad value.
void apply_config_text(std::string_view text, CycleConfig& config);

/// Runs the command line. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cvrank
