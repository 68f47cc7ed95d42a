#pragma once

#include <cstdint>
#include <string>

#include "hinet/volume.hpp"

namespace hinet {

struct BinaryCounts {
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t tn = 0;
  int64_t fn = 0;
  int64_t total() const { return tp + fp + tn + fn; }
};

// Confusion counts over two 0/1 masks of equal extents; non-binary values are
// rejected.
BinaryCounts confusion_counts(const LabelVolume& pred_mask, const LabelVolume& gt_mask);

// 2|A∩B| / (|A|+|B|); both masks empty -> 1.0 by convention.
double dsc(const LabelVolume& pred_mask, const LabelVolume& gt_mask);

// TP/(TP+FN) and TN/(TN+FP); an empty denominator -> 1.0 by convention.
double sensitivity(const LabelVolume& pred_mask, const LabelVolume& gt_mask);
double specificity(const LabelVolume& pred_mask, const LabelVolume& gt_mask);

struct RegionMetrics {
  double dsc = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  BinaryCounts counts;
  // set where the 1.0 convention for an empty denominator kicked in
  bool dsc_degenerate = false;
  bool sensitivity_degenerate = false;
  bool specificity_degenerate = false;
};

// Per-region DSC / sensitivity / specificity plus raw counts, mirroring the
// usual results-table row structure (WT, TC, ET).
struct MetricsReport {
  RegionMetrics wt, tc, et;

  const RegionMetrics& region(Region r) const {
    switch (r) {
      case Region::WT: return wt;
      case Region::TC: return tc;
      default: return et;
    }
  }
};

MetricsReport evaluate_regions(const LabelVolume& pred, const LabelVolume& gt);

std::string metrics_to_json(const MetricsReport& report);
std::string metrics_table(const MetricsReport& report);  // scores scaled by 100

}  // namespace hinet
