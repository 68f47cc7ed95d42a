#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "hinet/tensor.hpp"
#include "hinet/thread_pool.hpp"

namespace hinet {

inline int64_t conv_out_extent(int64_t in, int stride) { return (in + stride - 1) / stride; }

template <typename T>
inline void check_conv_args(const Tensor5<T>& x, const ConvWeights<T>& k) {
  k.validate();
  if (x.numel() == 0)
    throw std::invalid_argument("conv3d: zero-extent input " + shape_str(x.shape));
  if (x.c() != k.c_in())
    throw std::invalid_argument("conv3d: input channels mismatch, input " + shape_str(x.shape) +
                                " vs kernel " + shape_str(k.w.shape));
  // any odd kernel fits a non-empty input under symmetric "same" padding
}

// Zero-padded "same" 3-D convolution with stride 1 or 2. Output spatial extent
// is ceil(extent/stride). Per output element the reduction runs in fixed
// (c_in, kz, ky, kx) order, out-of-range taps contribute nothing; each output
// element is written by exactly one task, so results are deterministic for any
// thread count.
template <typename T>
Tensor5<T> conv3d(const Tensor5<T>& x, const ConvWeights<T>& k) {
  check_conv_args(x, k);
  const int s = k.stride;
  const int64_t N = x.n(), CI = x.c(), Z = x.z(), Y = x.y(), X = x.x();
  const int64_t CO = k.c_out(), KZ = k.kz(), KY = k.ky(), KX = k.kx();
  const int64_t PZ = (KZ - 1) / 2, PY = (KY - 1) / 2, PX = (KX - 1) / 2;
  const int64_t OZ = conv_out_extent(Z, s), OY = conv_out_extent(Y, s), OX = conv_out_extent(X, s);

  Tensor5<T> out(N, CO, OZ, OY, OX);
  const int64_t rows = N * CO * OZ;
  const int64_t work = OY * OX * CI * KZ * KY * KX;

  parallel_for_rows(rows, work, [&](int64_t r) {
    const int64_t oz = r % OZ;
    const int64_t oc = (r / OZ) % CO;
    const int64_t n = r / (OZ * CO);
    for (int64_t oy = 0; oy < OY; ++oy) {
      T* orow = out.row(n, oc, oz, oy);
      for (int64_t ox = 0; ox < OX; ++ox) orow[ox] = k.b[static_cast<size_t>(oc)];
      for (int64_t ic = 0; ic < CI; ++ic) {
        for (int64_t kz = 0; kz < KZ; ++kz) {
          const int64_t iz = oz * s + kz - PZ;
          if (iz < 0 || iz >= Z) continue;
          for (int64_t ky = 0; ky < KY; ++ky) {
            const int64_t iy = oy * s + ky - PY;
            if (iy < 0 || iy >= Y) continue;
            const T* xrow = x.row(n, ic, iz, iy);
            const T* wrow = k.w.row(oc, ic, kz, ky);
            for (int64_t kx = 0; kx < KX; ++kx) {
              const T wv = wrow[kx];
              const int64_t off = kx - PX;
              // valid ox range: 0 <= ox*s + off < X
              int64_t lo = off < 0 ? (-off + s - 1) / s : 0;
              int64_t hi = std::min(OX, (X - off + s - 1) / s);
              if (s == 1) {
                for (int64_t ox = lo; ox < hi; ++ox) orow[ox] += wv * xrow[ox + off];
              } else {
                for (int64_t ox = lo; ox < hi; ++ox) orow[ox] += wv * xrow[ox * s + off];
              }
            }
          }
        }
      }
    }
  });
  return out;
}

// Gradient of sum(dy * conv3d(x, k)) with respect to the input: scatter of dy
// through the kernel, written gather-style so each dx element is owned by one
// task. Reduction order per element is fixed (c_out, kz, ky, kx).
template <typename T>
Tensor5<T> conv3d_grad_input(const Tensor5<T>& x_shape_ref, const ConvWeights<T>& k,
                             const Tensor5<T>& dy) {
  const int s = k.stride;
  const int64_t N = x_shape_ref.n(), CI = x_shape_ref.c();
  const int64_t Z = x_shape_ref.z(), Y = x_shape_ref.y(), X = x_shape_ref.x();
  const int64_t CO = k.c_out(), KZ = k.kz(), KY = k.ky(), KX = k.kx();
  const int64_t PZ = (KZ - 1) / 2, PY = (KY - 1) / 2, PX = (KX - 1) / 2;
  const int64_t OZ = dy.z(), OY = dy.y(), OX = dy.x();

  Tensor5<T> dx(N, CI, Z, Y, X);
  const int64_t rows = N * CI * Z;
  const int64_t work = Y * X * CO * KZ * KY * KX;

  parallel_for_rows(rows, work, [&](int64_t r) {
    const int64_t iz = r % Z;
    const int64_t ic = (r / Z) % CI;
    const int64_t n = r / (Z * CI);
    for (int64_t iy = 0; iy < Y; ++iy) {
      T* drow = dx.row(n, ic, iz, iy);
      for (int64_t oc = 0; oc < CO; ++oc) {
        for (int64_t kz = 0; kz < KZ; ++kz) {
          const int64_t num_z = iz + PZ - kz;
          if (num_z % s != 0) continue;
          const int64_t oz = num_z / s;
          if (oz < 0 || oz >= OZ) continue;
          for (int64_t ky = 0; ky < KY; ++ky) {
            const int64_t num_y = iy + PY - ky;
            if (num_y % s != 0) continue;
            const int64_t oy = num_y / s;
            if (oy < 0 || oy >= OY) continue;
            const T* dyrow = dy.row(n, oc, oz, oy);
            const T* wrow = k.w.row(oc, ic, kz, ky);
            for (int64_t kx = 0; kx < KX; ++kx) {
              const T wv = wrow[kx];
              if (s == 1) {
                // ox = ix + PX - kx
                const int64_t off = PX - kx;
                const int64_t lo = std::max<int64_t>(0, -off);
                const int64_t hi = std::min<int64_t>(X, OX - off);
                for (int64_t ix = lo; ix < hi; ++ix) drow[ix] += wv * dyrow[ix + off];
              } else {
                for (int64_t ix = 0; ix < X; ++ix) {
                  const int64_t num_x = ix + PX - kx;
                  if (num_x % s != 0) continue;
                  const int64_t ox = num_x / s;
                  if (ox < 0 || ox >= OX) continue;
                  drow[ix] += wv * dyrow[ox];
                }
              }
            }
          }
        }
      }
    }
  });
  return dx;
}

// Gradients with respect to weights and bias. Parallel over output channels;
// each task owns dw[oc] and db[oc], accumulating over (n, oz, oy, ox) in fixed
// order.
template <typename T>
ConvWeights<T> conv3d_grad_weights(const Tensor5<T>& x, const ConvWeights<T>& k,
                                   const Tensor5<T>& dy) {
  const int s = k.stride;
  const int64_t N = x.n(), CI = x.c(), Z = x.z(), Y = x.y(), X = x.x();
  const int64_t CO = k.c_out(), KZ = k.kz(), KY = k.ky(), KX = k.kx();
  const int64_t PZ = (KZ - 1) / 2, PY = (KY - 1) / 2, PX = (KX - 1) / 2;
  const int64_t OZ = dy.z(), OY = dy.y(), OX = dy.x();

  ConvWeights<T> grad = ConvWeights<T>::zeros_like(k);
  const int64_t work = N * OZ * OY * OX * CI * KZ * KY * KX;

  parallel_for_rows(CO, work, [&](int64_t oc) {
    T db = T(0);
    for (int64_t n = 0; n < N; ++n) {
      for (int64_t oz = 0; oz < OZ; ++oz) {
        for (int64_t oy = 0; oy < OY; ++oy) {
          const T* dyrow = dy.row(n, oc, oz, oy);
          for (int64_t ox = 0; ox < OX; ++ox) db += dyrow[ox];
          for (int64_t ic = 0; ic < CI; ++ic) {
            for (int64_t kz = 0; kz < KZ; ++kz) {
              const int64_t iz = oz * s + kz - PZ;
              if (iz < 0 || iz >= Z) continue;
              for (int64_t ky = 0; ky < KY; ++ky) {
                const int64_t iy = oy * s + ky - PY;
                if (iy < 0 || iy >= Y) continue;
                const T* xrow = x.row(n, ic, iz, iy);
                T* gwrow = grad.w.row(oc, ic, kz, ky);
                for (int64_t kx = 0; kx < KX; ++kx) {
                  const int64_t off = kx - PX;
                  int64_t lo = off < 0 ? (-off + s - 1) / s : 0;
                  int64_t hi = std::min(OX, (X - off + s - 1) / s);
                  T acc = T(0);
                  for (int64_t ox = lo; ox < hi; ++ox) acc += dyrow[ox] * xrow[ox * s + off];
                  gwrow[kx] += acc;
                }
              }
            }
          }
        }
      }
    }
    grad.b[static_cast<size_t>(oc)] = db;
  });
  return grad;
}

template <typename T>
struct ConvGradResult {
  Tensor5<T> dx;
  ConvWeights<T> dk;  // dw in .w, db in .b
};

template <typename T>
ConvGradResult<T> conv3d_grad(const Tensor5<T>& x, const ConvWeights<T>& k, const Tensor5<T>& dy) {
  check_conv_args(x, k);
  std::array<int64_t, 5> want = {x.n(), k.c_out(), conv_out_extent(x.z(), k.stride),
                                 conv_out_extent(x.y(), k.stride),
                                 conv_out_extent(x.x(), k.stride)};
  if (dy.shape != want)
    throw std::invalid_argument("conv3d_grad: cotangent shape " + shape_str(dy.shape) +
                                " does not match conv output " + shape_str(want));
  return {conv3d_grad_input(x, k, dy), conv3d_grad_weights(x, k, dy)};
}

template <typename T>
Tensor5<T> relu(const Tensor5<T>& x) {
  Tensor5<T> out(x.shape);
  for (size_t i = 0; i < x.data.size(); ++i) out.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
  return out;
}

// Passes dy where the forward input was positive. Takes the forward *output*:
// relu(x) > 0 exactly when x > 0, and the gradient at 0 is 0 by convention.
template <typename T>
Tensor5<T> relu_grad(const Tensor5<T>& fwd_out, const Tensor5<T>& dy) {
  if (!fwd_out.same_shape(dy))
    throw std::invalid_argument("relu_grad: shape mismatch " + shape_str(fwd_out.shape) + " vs " +
                                shape_str(dy.shape));
  Tensor5<T> dx(dy.shape);
  for (size_t i = 0; i < dy.data.size(); ++i)
    dx.data[i] = fwd_out.data[i] > T(0) ? dy.data[i] : T(0);
  return dx;
}

template <typename T>
Tensor5<T> upsample_nearest(const Tensor5<T>& x, int factor) {
  if (factor < 1) throw std::invalid_argument("upsample_nearest: factor must be >= 1");
  if (factor == 1) return x;
  const int64_t f = factor;
  Tensor5<T> out(x.n(), x.c(), x.z() * f, x.y() * f, x.x() * f);
  for (int64_t n = 0; n < x.n(); ++n)
    for (int64_t c = 0; c < x.c(); ++c)
      for (int64_t z = 0; z < out.z(); ++z)
        for (int64_t y = 0; y < out.y(); ++y) {
          const T* src = x.row(n, c, z / f, y / f);
          T* dst = out.row(n, c, z, y);
          for (int64_t xx = 0; xx < out.x(); ++xx) dst[xx] = src[xx / f];
        }
  return out;
}

// Sums dy over each factor^3 replication block.
template <typename T>
Tensor5<T> upsample_nearest_grad(const std::array<int64_t, 5>& in_shape, int factor,
                                 const Tensor5<T>& dy) {
  const int64_t f = factor;
  Tensor5<T> dx(in_shape);
  if (factor == 1) {
    dx.data = dy.data;
    return dx;
  }
  for (int64_t n = 0; n < dy.n(); ++n)
    for (int64_t c = 0; c < dy.c(); ++c)
      for (int64_t z = 0; z < dy.z(); ++z)
        for (int64_t y = 0; y < dy.y(); ++y) {
          const T* src = dy.row(n, c, z, y);
          T* dst = dx.row(n, c, z / f, y / f);
          for (int64_t xx = 0; xx < dy.x(); ++xx) dst[xx / f] += src[xx];
        }
  return dx;
}

template <typename T>
Tensor5<T> concat_channels(const std::vector<const Tensor5<T>*>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
  const Tensor5<T>& first = *parts[0];
  int64_t c_total = 0;
  for (const auto* p : parts) {
    if (p->n() != first.n() || p->z() != first.z() || p->y() != first.y() || p->x() != first.x())
      throw std::invalid_argument("concat_channels: spatial/batch mismatch " +
                                  shape_str(first.shape) + " vs " + shape_str(p->shape));
    c_total += p->c();
  }
  Tensor5<T> out(first.n(), c_total, first.z(), first.y(), first.x());
  const int64_t plane = first.spatial();
  for (int64_t n = 0; n < first.n(); ++n) {
    int64_t c_off = 0;
    for (const auto* p : parts) {
      std::memcpy(out.data.data() + out.index(n, c_off, 0, 0, 0),
                  p->data.data() + p->index(n, 0, 0, 0, 0),
                  static_cast<size_t>(p->c() * plane) * sizeof(T));
      c_off += p->c();
    }
  }
  return out;
}

// Splits dy back by the concatenation offsets.
template <typename T>
std::vector<Tensor5<T>> split_channels(const Tensor5<T>& dy, const std::vector<int64_t>& widths) {
  std::vector<Tensor5<T>> out;
  out.reserve(widths.size());
  int64_t total = 0;
  for (int64_t w : widths) total += w;
  if (total != dy.c())
    throw std::invalid_argument("split_channels: widths sum " + std::to_string(total) +
                                " != channels " + std::to_string(dy.c()));
  const int64_t plane = dy.spatial();
  int64_t c_off = 0;
  for (int64_t w : widths) {
    Tensor5<T> part(dy.n(), w, dy.z(), dy.y(), dy.x());
    for (int64_t n = 0; n < dy.n(); ++n)
      std::memcpy(part.data.data() + part.index(n, 0, 0, 0, 0),
                  dy.data.data() + dy.index(n, c_off, 0, 0, 0),
                  static_cast<size_t>(w * plane) * sizeof(T));
    out.push_back(std::move(part));
    c_off += w;
  }
  return out;
}

template <typename T>
Tensor5<T> eltwise_add(const Tensor5<T>& a, const Tensor5<T>& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("eltwise_add: shape mismatch " + shape_str(a.shape) + " vs " +
                                shape_str(b.shape));
  Tensor5<T> out(a.shape);
  for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] + b.data[i];
  return out;
}

// Per-voxel softmax over the channel axis, max-subtracted for stability.
template <typename T>
Tensor5<T> softmax_channels(const Tensor5<T>& x) {
  if (x.c() < 1) throw std::invalid_argument("softmax_channels: needs c >= 1");
  Tensor5<T> out(x.shape);
  const int64_t C = x.c(), plane = x.spatial();
  for (int64_t n = 0; n < x.n(); ++n) {
    const T* base = x.data.data() + x.index(n, 0, 0, 0, 0);
    T* obase = out.data.data() + out.index(n, 0, 0, 0, 0);
    for (int64_t v = 0; v < plane; ++v) {
      T m = base[v];
      for (int64_t c = 1; c < C; ++c) m = std::max(m, base[c * plane + v]);
      T sum = T(0);
      for (int64_t c = 0; c < C; ++c) {
        T e = std::exp(base[c * plane + v] - m);
        obase[c * plane + v] = e;
        sum += e;
      }
      const T inv = T(1) / sum;
      for (int64_t c = 0; c < C; ++c) obase[c * plane + v] *= inv;
    }
  }
  return out;
}

// Softmax Jacobian-vector product: dx_c = p_c * (dy_c - sum_k p_k dy_k).
template <typename T>
Tensor5<T> softmax_channels_grad(const Tensor5<T>& probs, const Tensor5<T>& dy) {
  if (!probs.same_shape(dy))
    throw std::invalid_argument("softmax_channels_grad: shape mismatch " +
                                shape_str(probs.shape) + " vs " + shape_str(dy.shape));
  Tensor5<T> dx(dy.shape);
  const int64_t C = probs.c(), plane = probs.spatial();
  for (int64_t n = 0; n < probs.n(); ++n) {
    const T* p = probs.data.data() + probs.index(n, 0, 0, 0, 0);
    const T* g = dy.data.data() + dy.index(n, 0, 0, 0, 0);
    T* d = dx.data.data() + dx.index(n, 0, 0, 0, 0);
    for (int64_t v = 0; v < plane; ++v) {
      T dot = T(0);
      for (int64_t c = 0; c < C; ++c) dot += p[c * plane + v] * g[c * plane + v];
      for (int64_t c = 0; c < C; ++c)
        d[c * plane + v] = p[c * plane + v] * (g[c * plane + v] - dot);
    }
  }
  return dx;
}

}  // namespace hinet
