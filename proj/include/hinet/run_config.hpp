#pragma once

#include <string>

#include "hinet/network.hpp"

namespace hinet {

// Training-run configuration, parsed from a JSON file. Unknown keys are
// rejected; every field has a documented default (see --help and the README).
struct RunConfig {
  NetworkConfig net;  // defaults overridden for desk scale below

  int64_t epochs = 30;
  int64_t steps_per_epoch = 10;
  int64_t phantom_count = 1;
  int64_t phantom_extent = 32;
  std::string hvol_dir;  // when set, samples come from .hvol files instead
  std::string out_dir = "out";
  double dice_r = 1.0;
  bool dice_include_background = true;
  double lr0 = 3e-5;
  double head_bg_bias = 2.5;  // background-prior logit applied to the head bias before training
  bool augment = true;
  bool check64 = false;  // run the 64-bit gradient suite before training

  RunConfig() {
    net.levels = 3;
    net.base_filters = 4;
    net.repetitions = {1, 2, 3};
  }
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string run_config_schema_help();

}  // namespace hinet
