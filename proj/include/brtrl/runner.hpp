#pragma once

#include <iosfwd>

#include "brtrl/config.hpp"

namespace brtrl {

// Executes one configured run: creates the output directory, echoes the
// resolved config into it, dispatches on the mode, and writes that mode's
// artifacts. Run reports go to `log` (stdout in the CLI).
void run_experiment(const ExperimentConfig& config, std::ostream& log);

}  // namespace brtrl
