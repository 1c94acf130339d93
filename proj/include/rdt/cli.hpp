#pragma once

#include <iosfwd>

namespace rdt {

/// Exit codes of run_cli().
enum ExitCode : int {
    kExitOk = 0,
    kExitViolations = 1,
    kExitInput = 2,
    kExitInfeasible = 3,
    kExitSolver = 4,
};

/// Entry point of the rdt executable; writes progress to `out` and
/// diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rdt
