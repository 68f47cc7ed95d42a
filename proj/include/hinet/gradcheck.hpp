#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hinet {

struct GradCheckEntry {
  std::string component;
  double worst_rel_err = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

// The 64-bit verification suite: every primitive, both block variants, the
// transitions, the dice loss and an end-to-end micro network, each compared
// against central finite differences (h = 1e-5). Setting the environment
// variable HINET_GRADCHECK_CORRUPT to a component name perturbs that
// component's analytic gradient, which must make the suite fail (test hook).
std::vector<GradCheckEntry> run_gradcheck_suite();

// Prints one line per component plus a verdict; returns 0 iff all pass.
int gradcheck_report(std::ostream& out);

}  // namespace hinet
