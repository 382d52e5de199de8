#pragma once

#include "fedleak/config.hpp"

namespace fedleak {

// Runs the configured experiment and writes every artifact, then a
// manifest.txt hashing each one, under config.output_dir. Returns a process
// exit status: 0 on success, 1 when a gradcheck report exceeds tolerance.
int run_experiment(const ExperimentConfig& config);

}  // namespace fedleak
