#pragma once

#include <iosfwd>

namespace steptime
{

/// Process exit codes of the command-line tool.
enum ExitCode : int
{
  exit_ok = 0,
  exit_error = 1,
  exit_diverged = 2
};

/** \brief Entry point of the `steptime` tool.
 *
 * Subcommands: run, sweep, certify, nominal and compare. The output directory defaults to
 * $STEPTIME_OUT_DIR, then the working directory.
 */
int run_cli(int argc, const char * const * argv, std::ostream & out, std::ostream & err);

} // namespace steptime
