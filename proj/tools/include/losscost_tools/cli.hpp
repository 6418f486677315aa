#pragma once

#include <iosfwd>

namespace losscost::tools {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitNumeric = 2,
  kExitWarnings = 3,
};

/// Entry point of the losscost tool; main() forwards to it. Diagnostics go
/// to `err`, progress lines to `out`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace losscost::tools
