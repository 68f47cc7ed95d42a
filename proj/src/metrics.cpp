#include "hinet/metrics.hpp"

#include <cstdio>
#include <json.hpp>

namespace hinet {

BinaryCounts confusion_counts(const LabelVolume& pred_mask, const LabelVolume& gt_mask) {
  if (pred_mask.extents != gt_mask.extents)
    throw std::invalid_argument("metrics: mask extent mismatch");
  BinaryCounts c;
  for (size_t i = 0; i < pred_mask.values.size(); ++i) {
    const uint8_t p = pred_mask.values[i];
    const uint8_t g = gt_mask.values[i];
    if (p > 1 || g > 1)
      throw std::invalid_argument("metrics: masks must be binary, found value " +
                                  std::to_string(p > 1 ? p : g));
    if (p && g)
      ++c.tp;
    else if (p && !g)
      ++c.fp;
    else if (!p && g)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

double dsc(const LabelVolume& pred_mask, const LabelVolume& gt_mask) {
  const auto c = confusion_counts(pred_mask, gt_mask);
  const int64_t denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return 1.0;  // both empty
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

double sensitivity(const LabelVolume& pred_mask, const LabelVolume& gt_mask) {
  const auto c = confusion_counts(pred_mask, gt_mask);
  if (c.tp + c.fn == 0) return 1.0;
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

double specificity(const LabelVolume& pred_mask, const LabelVolume& gt_mask) {
  const auto c = confusion_counts(pred_mask, gt_mask);
  if (c.tn + c.fp == 0) return 1.0;
  return static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
}

namespace {

RegionMetrics region_metrics(const LabelVolume& pred, const LabelVolume& gt, Region r) {
  const auto pm = region_binarize(pred, r);
  const auto gm = region_binarize(gt, r);
  RegionMetrics m;
  m.counts = confusion_counts(pm, gm);
  const int64_t dice_denom = 2 * m.counts.tp + m.counts.fp + m.counts.fn;
  m.dsc_degenerate = dice_denom == 0;
  m.dsc = m.dsc_degenerate ? 1.0
                           : 2.0 * static_cast<double>(m.counts.tp) /
                                 static_cast<double>(dice_denom);
  m.sensitivity_degenerate = m.counts.tp + m.counts.fn == 0;
  m.sensitivity = m.sensitivity_degenerate
                      ? 1.0
                      : static_cast<double>(m.counts.tp) /
                            static_cast<double>(m.counts.tp + m.counts.fn);
  m.specificity_degenerate = m.counts.tn + m.counts.fp == 0;
  m.specificity = m.specificity_degenerate
                      ? 1.0
                      : static_cast<double>(m.counts.tn) /
                            static_cast<double>(m.counts.tn + m.counts.fp);
  return m;
}

nlohmann::json region_json(const RegionMetrics& m) {
  nlohmann::json j;
  j["dsc"] = m.dsc;
  j["sensitivity"] = m.sensitivity;
  j["specificity"] = m.specificity;
  j["counts"] = {{"tp", m.counts.tp}, {"fp", m.counts.fp}, {"tn", m.counts.tn},
                 {"fn", m.counts.fn}};
  nlohmann::json flags = nlohmann::json::array();
  if (m.dsc_degenerate) flags.push_back("dsc_empty_empty");
  if (m.sensitivity_degenerate) flags.push_back("sensitivity_empty_denominator");
  if (m.specificity_degenerate) flags.push_back("specificity_empty_denominator");
  j["degenerate"] = flags;
  return j;
}

}  // namespace

MetricsReport evaluate_regions(const LabelVolume& pred, const LabelVolume& gt) {
  if (pred.extents != gt.extents)
    throw std::invalid_argument("evaluate_regions: extent mismatch");
  MetricsReport report;
  report.wt = region_metrics(pred, gt, Region::WT);
  report.tc = region_metrics(pred, gt, Region::TC);
  report.et = region_metrics(pred, gt, Region::ET);
  return report;
}

std::string metrics_to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["WT"] = region_json(report.wt);
  j["TC"] = region_json(report.tc);
  j["ET"] = region_json(report.et);
  return j.dump(2);
}

std::string metrics_table(const MetricsReport& report) {
  char buf[256];
  std::string out = "Region      DSC  Sensitivity  Specificity\n";
  for (Region r : kAllRegions) {
    const RegionMetrics& m = report.region(r);
    std::snprintf(buf, sizeof(buf), "%-6s %8.3f %12.3f %12.3f%s\n", region_name(r), m.dsc * 100.0,
                  m.sensitivity * 100.0, m.specificity * 100.0,
                  (m.dsc_degenerate || m.sensitivity_degenerate || m.specificity_degenerate)
                      ? "  [degenerate: empty denominator -> 1.0]"
                      : "");
    out += buf;
  }
  return out;
}

}  // namespace hinet
