#pragma once

#include <array>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hinet {

// Dense 5-axis tensor, axes (n, c, z, y, x), row-major with x fastest.
// T is float for training, double for gradient-check mode.
template <typename T>
struct Tensor5 {
  std::array<int64_t, 5> shape{0, 0, 0, 0, 0};
  std::vector<T> data;

  Tensor5() = default;
  Tensor5(int64_t n, int64_t c, int64_t z, int64_t y, int64_t x)
      : shape{n, c, z, y, x}, data(static_cast<size_t>(n * c * z * y * x), T(0)) {}
  explicit Tensor5(const std::array<int64_t, 5>& s)
      : Tensor5(s[0], s[1], s[2], s[3], s[4]) {}

  int64_t n() const { return shape[0]; }
  int64_t c() const { return shape[1]; }
  int64_t z() const { return shape[2]; }
  int64_t y() const { return shape[3]; }
  int64_t x() const { return shape[4]; }

  int64_t numel() const { return shape[0] * shape[1] * shape[2] * shape[3] * shape[4]; }
  int64_t spatial() const { return shape[2] * shape[3] * shape[4]; }

  int64_t index(int64_t n, int64_t c, int64_t z, int64_t y, int64_t x) const {
    return (((n * shape[1] + c) * shape[2] + z) * shape[3] + y) * shape[4] + x;
  }
  T& at(int64_t n, int64_t c, int64_t z, int64_t y, int64_t x) {
    return data[static_cast<size_t>(index(n, c, z, y, x))];
  }
  const T& at(int64_t n, int64_t c, int64_t z, int64_t y, int64_t x) const {
    return data[static_cast<size_t>(index(n, c, z, y, x))];
  }

  T* row(int64_t n, int64_t c, int64_t z, int64_t y) { return data.data() + index(n, c, z, y, 0); }
  const T* row(int64_t n, int64_t c, int64_t z, int64_t y) const {
    return data.data() + index(n, c, z, y, 0);
  }

  bool same_shape(const Tensor5& o) const { return shape == o.shape; }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  static Tensor5 zeros_like(const Tensor5& o) { return Tensor5(o.shape); }

  template <typename U>
  Tensor5<U> cast() const {
    Tensor5<U> out(shape);
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

inline std::string shape_str(const std::array<int64_t, 5>& s) {
  std::ostringstream os;
  os << "(" << s[0] << "," << s[1] << "," << s[2] << "," << s[3] << "," << s[4] << ")";
  return os.str();
}

// Weights of one 3-D convolution: w shaped (c_out, c_in, kz, ky, kx), bias of
// length c_out. Kernel extents must be odd (or 1) so "same" padding is symmetric.
template <typename T>
struct ConvWeights {
  Tensor5<T> w;
  std::vector<T> b;
  int stride = 1;

  ConvWeights() = default;
  ConvWeights(int64_t c_out, int64_t c_in, int64_t kz, int64_t ky, int64_t kx, int stride_ = 1)
      : w(c_out, c_in, kz, ky, kx), b(static_cast<size_t>(c_out), T(0)), stride(stride_) {
    validate();
  }

  int64_t c_out() const { return w.shape[0]; }
  int64_t c_in() const { return w.shape[1]; }
  int64_t kz() const { return w.shape[2]; }
  int64_t ky() const { return w.shape[3]; }
  int64_t kx() const { return w.shape[4]; }

  int64_t param_count() const { return w.numel() + static_cast<int64_t>(b.size()); }

  void validate() const {
    for (int a = 2; a < 5; ++a) {
      int64_t k = w.shape[a];
      if (k < 1 || (k != 1 && k % 2 == 0))
        throw std::invalid_argument("ConvWeights: kernel extent " + std::to_string(k) +
                                    " must be odd or 1, got shape " + shape_str(w.shape));
    }
    if (static_cast<int64_t>(b.size()) != w.shape[0])
      throw std::invalid_argument("ConvWeights: bias length " + std::to_string(b.size()) +
                                  " != c_out " + std::to_string(w.shape[0]));
    if (stride != 1 && stride != 2)
      throw std::invalid_argument("ConvWeights: stride must be 1 or 2, got " +
                                  std::to_string(stride));
  }

  static ConvWeights zeros_like(const ConvWeights& o) {
    ConvWeights g;
    g.w = Tensor5<T>(o.w.shape);
    g.b.assign(o.b.size(), T(0));
    g.stride = o.stride;
    return g;
  }

  template <typename U>
  ConvWeights<U> cast() const {
    ConvWeights<U> out;
    out.w = w.template cast<U>();
    out.b.assign(b.begin(), b.end());
    out.stride = stride;
    return out;
  }
};

}  // namespace hinet
