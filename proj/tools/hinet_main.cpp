#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "hinet/bench.hpp"
#include "hinet/checkpoint.hpp"
#include "hinet/gradcheck.hpp"
#include "hinet/metrics.hpp"
#include "hinet/network.hpp"
#include "hinet/run_config.hpp"
#include "hinet/train.hpp"
#include "hinet/volume.hpp"

namespace {

// exit codes: 0 success, 1 verification failure, 2 usage/input error,
// 3 numerical abort

int cmd_train(const std::string& config_path) {
  hinet::RunConfig cfg;
  try {
    cfg = hinet::load_run_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  try {
    auto outcome = hinet::run_training(cfg, std::cout);
    if (!outcome.error.empty()) std::cerr << "error: " << outcome.error << "\n";
    return outcome.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int cmd_predict(const std::string& ckpt, const std::string& in_path,
                const std::string& out_path) {
  try {
    hinet::Network<float> net = hinet::load_checkpoint(ckpt);
    hinet::VolumeSample sample = hinet::read_volume(in_path);
    if (sample.image.c() != net.cfg.in_channels) {
      std::cerr << "error: input has " << sample.image.c() << " modalities, network expects "
                << net.cfg.in_channels << "\n";
      return 2;
    }
    hinet::ForwardCache<float> cache;
    hinet::Tensor5<float> probs = hinet::forward(net, sample.image, cache);
    hinet::VolumeSample prediction;
    prediction.labels = hinet::argmax_labels(probs);
    prediction.image = hinet::Tensor5<float>(1, 0, prediction.labels.extents[0],
                                             prediction.labels.extents[1],
                                             prediction.labels.extents[2]);
    hinet::write_volume(out_path, prediction);
    std::cout << "prediction written to " << out_path << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int cmd_evaluate(const std::string& pred_path, const std::string& gt_path,
                 const std::string& json_path) {
  try {
    hinet::VolumeSample pred = hinet::read_volume(pred_path);
    hinet::VolumeSample gt = hinet::read_volume(gt_path);
    if (pred.labels.extents != gt.labels.extents) {
      std::cerr << "error: extent mismatch between prediction and ground truth\n";
      return 2;
    }
    hinet::MetricsReport report = hinet::evaluate_regions(pred.labels, gt.labels);
    std::cout << hinet::metrics_table(report);
    if (!json_path.empty()) {
      std::ofstream f(json_path, std::ios::trunc);
      if (!f) {
        std::cerr << "error: cannot write " << json_path << "\n";
        return 2;
      }
      f << hinet::metrics_to_json(report) << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "hinet: hyperdense inception 3D UNet - training, prediction, evaluation,\n"
      "gradient checking and the factorized-convolution benchmark.\n"
      "HINET_THREADS caps internal parallelism (default: hardware count)."};
  app.require_subcommand(1);

  std::string config_path;
  auto* train = app.add_subcommand("train", "train from a JSON config");
  train->add_option("--config", config_path, "path to the run config JSON")->required();
  train->footer(hinet::run_config_schema_help());

  std::string ckpt, in_path, out_path;
  auto* predict = app.add_subcommand("predict", "segment a .hvol volume with a checkpoint");
  predict->add_option("--ckpt", ckpt, "checkpoint file")->required();
  predict->add_option("--in", in_path, "input .hvol")->required();
  predict->add_option("--out", out_path, "output .hvol (labels only)")->required();

  std::string pred_path, gt_path, eval_json;
  auto* evaluate = app.add_subcommand("evaluate", "per-region DSC/sensitivity/specificity");
  evaluate->add_option("--pred", pred_path, "predicted .hvol")->required();
  evaluate->add_option("--gt", gt_path, "ground-truth .hvol")->required();
  evaluate->add_option("--json", eval_json, "also write a JSON report");

  auto* gradcheck = app.add_subcommand("gradcheck", "run the 64-bit finite-difference suite");

  int64_t bench_channels = 8, bench_extent = 32, bench_repeats = 5;
  std::string bench_json;
  auto* bench = app.add_subcommand("bench", "full vs factorized convolution comparison");
  bench->add_option("--channels", bench_channels, "channel count (default 8)");
  bench->add_option("--extent", bench_extent, "cubic extent (default 32)");
  bench->add_option("--repeats", bench_repeats, "timing repeats (default 5)");
  bench->add_option("--json", bench_json, "also write a JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (train->parsed()) return cmd_train(config_path);
  if (predict->parsed()) return cmd_predict(ckpt, in_path, out_path);
  if (evaluate->parsed()) return cmd_evaluate(pred_path, gt_path, eval_json);
  if (gradcheck->parsed()) return hinet::gradcheck_report(std::cout);
  if (bench->parsed()) {
    try {
      return hinet::bench_report(bench_channels, bench_extent, bench_repeats, std::cout,
                                 bench_json);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
  }
  return 2;
}
