#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "hinet/network.hpp"

namespace hinet {

// Step-decay schedule: lr0 halved every `period` epochs.
struct LrSchedule {
  double lr0 = 3e-5;
  double factor = 0.5;
  int64_t period = 30;

  double at(int64_t epoch) const {
    return lr0 * std::pow(factor, static_cast<double>(epoch / period));
  }
};

inline double lr_at(int64_t epoch) { return LrSchedule{}.at(epoch); }

// Adam with bias correction. Moments mirror the parameter registry; t counts
// completed steps.
template <typename T>
struct AdamState {
  std::vector<ConvWeights<T>> m;  // first moments, registry order
  std::vector<ConvWeights<T>> v;  // second moments
  int64_t t = 0;
  double lr = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState init(Network<T>& net, double lr0) {
    AdamState st;
    st.lr = lr0;
    net.visit_params([&](const std::string&, ConvWeights<T>& p) {
      st.m.push_back(ConvWeights<T>::zeros_like(p));
      st.v.push_back(ConvWeights<T>::zeros_like(p));
    });
    return st;
  }
};

namespace detail {

template <typename T>
void adam_update_span(T* p, const T* g, T* m, T* v, size_t count, double lr, double beta1,
                      double beta2, double eps, double bc1, double bc2) {
  for (size_t i = 0; i < count; ++i) {
    const double gi = static_cast<double>(g[i]);
    const double mi = beta1 * static_cast<double>(m[i]) + (1.0 - beta1) * gi;
    const double vi = beta2 * static_cast<double>(v[i]) + (1.0 - beta2) * gi * gi;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double m_hat = mi / bc1;
    const double v_hat = vi / bc2;
    p[i] = static_cast<T>(static_cast<double>(p[i]) - lr * m_hat / (std::sqrt(v_hat) + eps));
  }
}

}  // namespace detail

// One Adam step over the whole registry. Gradient shapes must mirror the
// parameters; state.t advances by exactly 1.
template <typename T>
void adam_step(Network<T>& net, NetGrads<T>& grads, AdamState<T>& st) {
  std::vector<ConvWeights<T>*> params, gs;
  net.visit_params([&](const std::string&, ConvWeights<T>& p) { params.push_back(&p); });
  grads.visit_params([&](const std::string&, ConvWeights<T>& g) { gs.push_back(&g); });
  if (params.size() != gs.size() || params.size() != st.m.size())
    throw std::invalid_argument("adam_step: registry size mismatch");

  st.t += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  for (size_t i = 0; i < params.size(); ++i) {
    ConvWeights<T>& p = *params[i];
    ConvWeights<T>& g = *gs[i];
    if (p.w.shape != g.w.shape || p.b.size() != g.b.size())
      throw std::invalid_argument("adam_step: gradient shape mismatch at registry index " +
                                  std::to_string(i));
    detail::adam_update_span(p.w.data.data(), g.w.data.data(), st.m[i].w.data.data(),
                             st.v[i].w.data.data(), p.w.data.size(), st.lr, st.beta1, st.beta2,
                             st.eps, bc1, bc2);
    detail::adam_update_span(p.b.data(), g.b.data(), st.m[i].b.data(), st.v[i].b.data(),
                             p.b.size(), st.lr, st.beta1, st.beta2, st.eps, bc1, bc2);
  }
}

}  // namespace hinet
