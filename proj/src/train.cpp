#include "hinet/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <vector>

#include "hinet/checkpoint.hpp"
#include "hinet/gradcheck.hpp"
#include "hinet/loss.hpp"
#include "hinet/optim.hpp"
#include "hinet/volume.hpp"

namespace hinet {

namespace fs = std::filesystem;

namespace {

// Center-crop every spatial extent down to the nearest multiple of div.
VolumeSample center_crop(const VolumeSample& s, int64_t div) {
  std::array<int64_t, 3> ext = s.labels.extents;
  std::array<int64_t, 3> want;
  for (int a = 0; a < 3; ++a) {
    want[static_cast<size_t>(a)] = (ext[static_cast<size_t>(a)] / div) * div;
    if (want[static_cast<size_t>(a)] < div)
      throw std::invalid_argument("sample extent " + std::to_string(ext[static_cast<size_t>(a)]) +
                                  " is smaller than the required divisor " + std::to_string(div));
  }
  if (want == ext) return s;
  std::array<int64_t, 3> off;
  for (int a = 0; a < 3; ++a)
    off[static_cast<size_t>(a)] = (ext[static_cast<size_t>(a)] - want[static_cast<size_t>(a)]) / 2;

  VolumeSample out;
  out.labels = LabelVolume(want[0], want[1], want[2]);
  for (int64_t z = 0; z < want[0]; ++z)
    for (int64_t y = 0; y < want[1]; ++y)
      for (int64_t x = 0; x < want[2]; ++x)
        out.labels.at(z, y, x) = s.labels.at(z + off[0], y + off[1], x + off[2]);
  out.image = Tensor5<float>(1, s.image.c(), want[0], want[1], want[2]);
  for (int64_t c = 0; c < s.image.c(); ++c)
    for (int64_t z = 0; z < want[0]; ++z)
      for (int64_t y = 0; y < want[1]; ++y)
        for (int64_t x = 0; x < want[2]; ++x)
          out.image.at(0, c, z, y, x) = s.image.at(0, c, z + off[0], y + off[1], x + off[2]);
  return out;
}

std::vector<VolumeSample> gather_samples(const RunConfig& cfg) {
  std::vector<VolumeSample> samples;
  if (!cfg.hvol_dir.empty()) {
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(cfg.hvol_dir))
      if (entry.is_regular_file() && entry.path().extension() == ".hvol")
        paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());
    if (paths.empty())
      throw std::invalid_argument("train: no .hvol files in " + cfg.hvol_dir);
    for (const auto& p : paths)
      samples.push_back(center_crop(read_volume(p), cfg.net.spatial_divisor()));
  } else {
    for (int64_t i = 0; i < cfg.phantom_count; ++i)
      samples.push_back(
          center_crop(make_phantom(derive_seed(cfg.net.seed, 1000 + static_cast<uint64_t>(i)),
                                   cfg.phantom_extent),
                      cfg.net.spatial_divisor()));
  }
  for (const auto& s : samples)
    if (s.image.c() != cfg.net.in_channels)
      throw std::invalid_argument("train: sample has " + std::to_string(s.image.c()) +
                                  " modalities but the network expects " +
                                  std::to_string(cfg.net.in_channels));
  return samples;
}

}  // namespace

TrainOutcome run_training(const RunConfig& cfg, std::ostream& progress) {
  TrainOutcome out;
  if (cfg.net.num_classes != 4) {
    out.exit_code = 2;
    out.error = "train: labeled training requires num_classes = 4 (label codes [0,1,2,4])";
    return out;
  }

  if (cfg.check64) {
    progress << "running 64-bit gradient suite before training\n";
    if (gradcheck_report(progress) != 0) {
      out.exit_code = 1;
      out.error = "train: gradient verification failed";
      return out;
    }
  }

  std::vector<VolumeSample> samples = gather_samples(cfg);
  Network<float> net = build_hinet<float>(cfg.net);
  // start from a background-heavy prior so small-class dice terms are not
  // diluted over the whole volume early on
  net.head.b[0] = static_cast<float>(cfg.head_bg_bias);
  LrSchedule schedule;
  schedule.lr0 = cfg.lr0;
  AdamState<float> adam = AdamState<float>::init(net, cfg.lr0);
  DiceConfig dice = cfg.dice_include_background
                        ? DiceConfig::all_classes(cfg.net.num_classes, cfg.dice_r)
                        : DiceConfig::foreground(cfg.net.num_classes, cfg.dice_r);

  fs::create_directories(cfg.out_dir);
  out.log_path = (fs::path(cfg.out_dir) / "train_log.csv").string();
  out.checkpoint_path = (fs::path(cfg.out_dir) / "checkpoint.hint").string();
  std::ofstream log(out.log_path, std::ios::trunc);
  if (!log) {
    out.exit_code = 2;
    out.error = "train: cannot write " + out.log_path;
    return out;
  }
  log << "epoch,step,loss,lr\n";

  char line[128];
  ForwardCache<float> cache;
  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    adam.lr = schedule.at(epoch);
    double epoch_loss = 0.0;
    for (int64_t step = 0; step < cfg.steps_per_epoch; ++step) {
      const int64_t global_step = epoch * cfg.steps_per_epoch + step;
      const VolumeSample& base =
          samples[static_cast<size_t>(global_step % static_cast<int64_t>(samples.size()))];
      VolumeSample sample =
          cfg.augment
              ? augment(base, derive_seed(cfg.net.seed, 2000 + static_cast<uint64_t>(global_step)))
              : base;
      const Tensor5<float> target = one_hot<float>(sample.labels);

      forward(net, sample.image, cache);
      bool finite = true;
      for (float v : cache.probs.data) finite = finite && std::isfinite(v);
      const double loss =
          finite ? dice_loss(cache.probs, target, dice) : std::numeric_limits<double>::quiet_NaN();
      std::snprintf(line, sizeof(line), "%lld,%lld,%.17g,%.17g\n",
                    static_cast<long long>(epoch), static_cast<long long>(step), loss, adam.lr);
      log << line;
      if (!std::isfinite(loss)) {
        out.exit_code = 3;
        out.error = "train: non-finite loss at epoch " + std::to_string(epoch) + " step " +
                    std::to_string(step);
        return out;
      }
      auto dprobs = dice_loss_grad(cache.probs, target, dice);
      auto grads = backward(net, cache, dprobs);
      adam_step(net, grads, adam);
      epoch_loss = loss;
      out.final_loss = loss;
    }
    std::snprintf(line, sizeof(line), "epoch %lld  lr %.3g  loss %.6f\n",
                  static_cast<long long>(epoch), adam.lr, epoch_loss);
    progress << line;
  }

  log.close();
  save_checkpoint(out.checkpoint_path, net);
  progress << "checkpoint written to " << out.checkpoint_path << "\n";
  return out;
}

}  // namespace hinet
