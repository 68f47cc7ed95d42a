#include "hinet/run_config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>

namespace hinet {

using nlohmann::json;

namespace {

const std::set<std::string> kKnownKeys = {
    "levels",        "base_filters",    "repetitions",   "block_variant",
    "num_classes",   "in_channels",     "seed",          "epochs",
    "steps_per_epoch", "phantom_count", "phantom_extent", "hvol_dir",
    "out_dir",       "dice_r",          "dice_include_background",
    "lr0",           "head_bg_bias",    "augment",       "check64",
};

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: top level must be a JSON object");

  for (const auto& [key, value] : j.items())
    if (!kKnownKeys.count(key))
      throw std::invalid_argument("config: unknown key '" + key + "'");

  RunConfig cfg;
  try {
    if (j.contains("levels")) cfg.net.levels = j["levels"].get<int>();
    if (j.contains("base_filters")) cfg.net.base_filters = j["base_filters"].get<int64_t>();
    if (j.contains("repetitions"))
      cfg.net.repetitions = j["repetitions"].get<std::vector<int>>();
    else if (j.contains("levels")) {
      cfg.net.repetitions.clear();
      for (int l = 1; l <= cfg.net.levels; ++l) cfg.net.repetitions.push_back(l);
    }
    if (j.contains("block_variant")) {
      const std::string v = j["block_variant"].get<std::string>();
      if (v == "hyperdense")
        cfg.net.block_variant = BlockVariant::Hyperdense;
      else if (v == "baseline")
        cfg.net.block_variant = BlockVariant::Baseline;
      else
        throw std::invalid_argument("config: block_variant must be 'hyperdense' or 'baseline'");
    }
    if (j.contains("num_classes")) cfg.net.num_classes = j["num_classes"].get<int64_t>();
    if (j.contains("in_channels")) cfg.net.in_channels = j["in_channels"].get<int64_t>();
    if (j.contains("seed")) cfg.net.seed = j["seed"].get<uint64_t>();
    if (j.contains("epochs")) cfg.epochs = j["epochs"].get<int64_t>();
    if (j.contains("steps_per_epoch")) cfg.steps_per_epoch = j["steps_per_epoch"].get<int64_t>();
    if (j.contains("phantom_count")) cfg.phantom_count = j["phantom_count"].get<int64_t>();
    if (j.contains("phantom_extent")) cfg.phantom_extent = j["phantom_extent"].get<int64_t>();
    if (j.contains("hvol_dir")) cfg.hvol_dir = j["hvol_dir"].get<std::string>();
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("dice_r")) cfg.dice_r = j["dice_r"].get<double>();
    if (j.contains("dice_include_background"))
      cfg.dice_include_background = j["dice_include_background"].get<bool>();
    if (j.contains("lr0")) cfg.lr0 = j["lr0"].get<double>();
    if (j.contains("head_bg_bias")) cfg.head_bg_bias = j["head_bg_bias"].get<double>();
    if (j.contains("augment")) cfg.augment = j["augment"].get<bool>();
    if (j.contains("check64")) cfg.check64 = j["check64"].get<bool>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: wrong value type: ") + e.what());
  }

  cfg.net.validate();
  if (cfg.epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
  if (cfg.steps_per_epoch < 1) throw std::invalid_argument("config: steps_per_epoch must be >= 1");
  if (cfg.dice_r <= 0.0) throw std::invalid_argument("config: dice_r must be positive");
  if (cfg.lr0 <= 0.0) throw std::invalid_argument("config: lr0 must be positive");
  if (cfg.hvol_dir.empty() && cfg.phantom_count < 1)
    throw std::invalid_argument("config: phantom_count must be >= 1 without hvol_dir");
  if (cfg.hvol_dir.empty() && cfg.phantom_extent < 16)
    throw std::invalid_argument("config: phantom_extent must be >= 16");
  if (cfg.out_dir.empty()) throw std::invalid_argument("config: out_dir must be non-empty");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_run_config(text);
}

std::string run_config_schema_help() {
  return R"(Config JSON keys (defaults in parentheses):
  levels (3)                encoder depth
  base_filters (4)          channel width at the top level; level l uses base_filters*2^l
  repetitions ([1,2,3])     blocks per encoder level; max must sit at the deepest level
  block_variant (hyperdense) 'hyperdense' or 'baseline'
  num_classes (4)           output classes, mapped to label codes [0,1,2,4]
  in_channels (4)           input modalities
  seed (0)                  master seed for init, phantoms and augmentation
  epochs (30)               training epochs; 0 writes the initial checkpoint only
  steps_per_epoch (10)      optimizer steps per epoch, batch size is fixed at 1
  phantom_count (1)         synthetic training volumes when hvol_dir is unset
  phantom_extent (32)       phantom cube extent (>= 16)
  hvol_dir ("")             directory of .hvol training volumes
  out_dir ("out")           output directory for checkpoint.hint and train_log.csv
  dice_r (1.0)              dice smoothing constant
  dice_include_background (true)  include class 0 in the dice class set
  lr0 (3e-5)                initial learning rate; halved every 30 epochs
  head_bg_bias (2.5)        background logit prior added to the head bias before training
  augment (true)            random mirrorings and 90-degree rotations per step
  check64 (false)           run the 64-bit gradient suite before training
)";
}

}  // namespace hinet
