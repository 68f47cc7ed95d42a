#include "hinet/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <vector>

#include "hinet/blocks.hpp"
#include "hinet/network.hpp"
#include "hinet/ops.hpp"
#include "hinet/rng.hpp"

namespace hinet {

namespace {

double median_ms(std::vector<double>& samples) {
  std::sort(samples.begin(), samples.end());
  const size_t n = samples.size();
  return n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

}  // namespace

BenchResult run_bench(int64_t channels, int64_t extent, int64_t repeats, uint64_t seed) {
  if (channels < 2 || extent < 4 || repeats < 1)
    throw std::invalid_argument("bench: need channels >= 2, extent >= 4, repeats >= 1");

  BenchResult r;
  r.channels = channels;
  r.extent = extent;
  r.repeats = repeats;

  const int64_t c_b = channels / 2;
  r.params_full = conv_param_count(channels, channels, 3, 3, 3);
  r.params_factorized = 3 * conv_param_count(c_b, channels, 1, 3, 3);
  const int64_t voxels = extent * extent * extent;
  r.macs_full = channels * channels * 27 * voxels;
  r.macs_factorized = 3 * (c_b * channels * 9) * voxels;
  r.counts_ok = r.params_factorized < r.params_full && r.macs_factorized < r.macs_full;

  SplitMix64 rng(seed);
  Tensor5<float> x(1, channels, extent, extent, extent);
  for (auto& v : x.data) v = static_cast<float>(rng.next_uniform(-1.0, 1.0));

  ConvWeights<float> full(channels, channels, 3, 3, 3);
  for (auto& v : full.w.data) v = static_cast<float>(rng.next_uniform(-0.5, 0.5));

  std::array<ConvWeights<float>, 3> views = {
      ConvWeights<float>(c_b, channels, 1, 3, 3),
      ConvWeights<float>(c_b, channels, 3, 1, 3),
      ConvWeights<float>(c_b, channels, 3, 3, 1),
  };
  for (auto& k : views)
    for (auto& v : k.w.data) v = static_cast<float>(rng.next_uniform(-0.5, 0.5));

  using clock = std::chrono::steady_clock;
  volatile float sink = 0.0f;  // keep the results alive

  auto time_full = [&]() {
    const auto t0 = clock::now();
    auto y = conv3d(x, full);
    const auto t1 = clock::now();
    sink = sink + y.data[0];
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
  };
  auto time_fact = [&]() {
    const auto t0 = clock::now();
    auto a = conv3d(x, views[0]);
    auto b = conv3d(x, views[1]);
    auto c = conv3d(x, views[2]);
    const auto t1 = clock::now();
    sink = sink + a.data[0] + b.data[0] + c.data[0];
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
  };

  time_full();  // warmup
  time_fact();
  std::vector<double> full_ms, fact_ms;
  for (int64_t i = 0; i < repeats; ++i) {
    full_ms.push_back(time_full());
    fact_ms.push_back(time_fact());
  }
  r.ms_full = median_ms(full_ms);
  r.ms_factorized = median_ms(fact_ms);
  return r;
}

int bench_report(int64_t channels, int64_t extent, int64_t repeats, std::ostream& out,
                 const std::string& json_path) {
  BenchResult r = run_bench(channels, extent, repeats);
  char line[256];
  std::snprintf(line, sizeof(line),
                "channels %lld, extent %lld^3, repeats %lld\n"
                "              %12s %14s\n"
                "params        %12lld %14lld\n"
                "MACs          %12lld %14lld\n"
                "median ms     %12.3f %14.3f\n",
                static_cast<long long>(r.channels), static_cast<long long>(r.extent),
                static_cast<long long>(r.repeats), "full 3x3x3", "factorized x3",
                static_cast<long long>(r.params_full), static_cast<long long>(r.params_factorized),
                static_cast<long long>(r.macs_full), static_cast<long long>(r.macs_factorized),
                r.ms_full, r.ms_factorized);
  out << line;
  out << (r.counts_ok ? "counts: factorized < full (OK)\n"
                      : "counts: FACTORIZED NOT SMALLER (FAIL)\n");

  if (!json_path.empty()) {
    nlohmann::json j;
    j["channels"] = r.channels;
    j["extent"] = r.extent;
    j["repeats"] = r.repeats;
    j["params_full"] = r.params_full;
    j["params_factorized"] = r.params_factorized;
    j["macs_full"] = r.macs_full;
    j["macs_factorized"] = r.macs_factorized;
    j["ms_full"] = r.ms_full;
    j["ms_factorized"] = r.ms_factorized;
    j["counts_ok"] = r.counts_ok;
    std::ofstream f(json_path, std::ios::trunc);
    if (!f) throw std::runtime_error("bench: cannot write " + json_path);
    f << j.dump(2) << "\n";
  }
  return r.counts_ok ? 0 : 1;
}

}  // namespace hinet
