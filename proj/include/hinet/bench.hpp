#pragma once

#include <cstdint>
#include <ostream>
#include <string>

namespace hinet {

// Compares one full 3x3x3 convolution (c -> c) against one factorized
// three-view stage (three 9-tap branches, c -> c/2 each) at the same input:
// exact parameter counts, exact multiply-accumulate counts, and median
// wall-clock over the requested repeats.
struct BenchResult {
  int64_t channels = 0;
  int64_t extent = 0;
  int64_t repeats = 0;
  int64_t params_full = 0;
  int64_t params_factorized = 0;
  int64_t macs_full = 0;
  int64_t macs_factorized = 0;
  double ms_full = 0.0;        // median milliseconds
  double ms_factorized = 0.0;
  bool counts_ok = false;  // params and MACs strictly lower for the factorized stage
};

BenchResult run_bench(int64_t channels, int64_t extent, int64_t repeats, uint64_t seed = 7);

// Prints the report (and optional JSON file); returns 0 iff the count
// assertions hold.
int bench_report(int64_t channels, int64_t extent, int64_t repeats, std::ostream& out,
                 const std::string& json_path = "");

}  // namespace hinet
