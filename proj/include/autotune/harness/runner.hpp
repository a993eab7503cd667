#pragma once

#include <filesystem>

#include "autotune/harness/config.hpp"
#include "autotune/harness/metrics.hpp"

namespace autotune::harness {

// Executes one run end to end: builds the pseudo-real env, misparametrizes
// the initial distribution mean, dispatches the configured method, streams
// metrics rows, and writes the final summary + checkpoints under out_dir.
// Throws ConfigError / NumericError / IoError; callers map to exit codes.
RunSummary cmd_run(const RunConfig& cfg);

// Maps an in-flight exception to the CLI failure classes
// (config=2, numeric=3, io=4, other=1).
int exit_code_for_current_exception();

}  // namespace autotune::harness
