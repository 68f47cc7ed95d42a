#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "hinet/tensor.hpp"

namespace hinet {

// Multi-label dice loss configuration. `r` is the smoothing constant added to
// numerator and denominator; `class_set` lists the class channels summed over
// (D is its size). `conventional` switches to the variant with the factor 2
// inside the per-class ratio; the default follows the printed form with 2/D
// outside.
struct DiceConfig {
  double r = 1.0;
  std::vector<int64_t> class_set;
  bool conventional = false;

  static DiceConfig all_classes(int64_t d, double r_ = 1.0) {
    DiceConfig cfg;
    cfg.r = r_;
    for (int64_t i = 0; i < d; ++i) cfg.class_set.push_back(i);
    return cfg;
  }

  static DiceConfig foreground(int64_t d, double r_ = 1.0) {
    DiceConfig cfg;
    cfg.r = r_;
    for (int64_t i = 1; i < d; ++i) cfg.class_set.push_back(i);
    return cfg;
  }
};

namespace detail {

struct DiceClassSums {
  double inter = 0.0;  // sum P*T
  double p_sum = 0.0;
  double t_sum = 0.0;
};

template <typename T>
void check_dice_args(const Tensor5<T>& p, const Tensor5<T>& t, const DiceConfig& cfg) {
  if (!p.same_shape(t))
    throw std::invalid_argument("dice: prediction shape " + shape_str(p.shape) +
                                " != target shape " + shape_str(t.shape));
  if (cfg.r <= 0.0) throw std::invalid_argument("dice: smoothing r must be positive");
  if (cfg.class_set.empty()) throw std::invalid_argument("dice: class_set must be non-empty");
  for (int64_t c : cfg.class_set)
    if (c < 0 || c >= p.c())
      throw std::invalid_argument("dice: class index " + std::to_string(c) +
                                  " out of range for " + std::to_string(p.c()) + " channels");
}

template <typename T>
DiceClassSums class_sums(const Tensor5<T>& p, const Tensor5<T>& t, int64_t cls) {
  DiceClassSums s;
  const int64_t plane = p.spatial();
  for (int64_t n = 0; n < p.n(); ++n) {
    const T* pp = p.data.data() + p.index(n, cls, 0, 0, 0);
    const T* tt = t.data.data() + t.index(n, cls, 0, 0, 0);
    for (int64_t j = 0; j < plane; ++j) {
      const double pv = static_cast<double>(pp[j]);
      const double tv = static_cast<double>(tt[j]);
      if (!std::isfinite(pv) || !std::isfinite(tv))
        throw std::invalid_argument("dice: non-finite input value");
      s.inter += pv * tv;
      s.p_sum += pv;
      s.t_sum += tv;
    }
  }
  return s;
}

}  // namespace detail

// Loss = -(2/D) * sum_{d in class_set} (sum_j P*T + r) / (sum_j P + sum_j T + r),
// with D = |class_set|. Sums run over batch and all voxels.
template <typename T>
double dice_loss(const Tensor5<T>& p, const Tensor5<T>& t, const DiceConfig& cfg) {
  detail::check_dice_args(p, t, cfg);
  const double d_count = static_cast<double>(cfg.class_set.size());
  double acc = 0.0;
  for (int64_t cls : cfg.class_set) {
    auto s = detail::class_sums(p, t, cls);
    const double den = s.p_sum + s.t_sum + cfg.r;
    if (cfg.conventional)
      acc += (2.0 * s.inter + cfg.r) / den;
    else
      acc += (s.inter + cfg.r) / den;
  }
  return cfg.conventional ? -acc / d_count : -(2.0 / d_count) * acc;
}

// dLoss/dP. Classes outside class_set get zero gradient; T is data, so no
// gradient flows to it.
template <typename T>
Tensor5<T> dice_loss_grad(const Tensor5<T>& p, const Tensor5<T>& t, const DiceConfig& cfg) {
  detail::check_dice_args(p, t, cfg);
  const double d_count = static_cast<double>(cfg.class_set.size());
  Tensor5<T> dp(p.shape);
  const int64_t plane = p.spatial();
  for (int64_t cls : cfg.class_set) {
    auto s = detail::class_sums(p, t, cls);
    const double den = s.p_sum + s.t_sum + cfg.r;
    const double den2 = den * den;
    for (int64_t n = 0; n < p.n(); ++n) {
      const T* tt = t.data.data() + t.index(n, cls, 0, 0, 0);
      T* gg = dp.data.data() + dp.index(n, cls, 0, 0, 0);
      for (int64_t j = 0; j < plane; ++j) {
        const double tv = static_cast<double>(tt[j]);
        double g;
        if (cfg.conventional) {
          const double num = 2.0 * s.inter + cfg.r;
          g = -(1.0 / d_count) * (2.0 * tv * den - num) / den2;
        } else {
          const double num = s.inter + cfg.r;
          g = -(2.0 / d_count) * (tv * den - num) / den2;
        }
        gg[j] = static_cast<T>(g);
      }
    }
  }
  return dp;
}

}  // namespace hinet
