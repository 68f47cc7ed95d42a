#pragma once

#include <ostream>
#include <string>

#include "hinet/run_config.hpp"

namespace hinet {

struct TrainOutcome {
  int exit_code = 0;  // 0 ok, 1 verification failure, 2 input error, 3 numerical abort
  std::string error;
  double final_loss = 0.0;
  std::string checkpoint_path;
  std::string log_path;
};

// Runs epochs x steps of [sample/augment -> forward -> dice loss -> backward
// -> adam with the step-decay schedule], batch size 1, then writes the
// checkpoint and a CSV loss log. Deterministic given the seed, independent of
// HINET_THREADS.
TrainOutcome run_training(const RunConfig& cfg, std::ostream& progress);

}  // namespace hinet
