#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "hinet/ops.hpp"
#include "hinet/rng.hpp"
#include "support/oracles.hpp"

using namespace hinet;
using oracles::fill_uniform;
using oracles::max_rel_err;
using oracles::rel_err;

namespace {

template <typename T>
Tensor5<T> random_tensor(SplitMix64& rng, int64_t n, int64_t c, int64_t z, int64_t y, int64_t x) {
  Tensor5<T> t(n, c, z, y, x);
  fill_uniform(t, rng);
  return t;
}

}  // namespace

TEST_CASE("conv3d identity kernel") {
  SplitMix64 rng(1);
  auto x = random_tensor<float>(rng, 1, 1, 3, 4, 5);
  ConvWeights<float> k(1, 1, 1, 1, 1);
  k.w.data[0] = 1.0f;
  auto y = conv3d(x, k);
  CHECK(y.shape == x.shape);
  for (size_t i = 0; i < x.data.size(); ++i) CHECK(y.data[i] == x.data[i]);
}

TEST_CASE("conv3d all-ones kernel counts taps inside padding") {
  Tensor5<float> x(1, 1, 5, 5, 5);
  x.fill(1.0f);
  ConvWeights<float> k(1, 1, 3, 3, 3);
  k.w.fill(1.0f);
  auto y = conv3d(x, k);
  CHECK(y.at(0, 0, 2, 2, 2) == doctest::Approx(27.0f));
  CHECK(y.at(0, 0, 0, 0, 0) == doctest::Approx(8.0f));
  CHECK(y.at(0, 0, 0, 0, 2) == doctest::Approx(12.0f));
}

TEST_CASE("conv3d matches nested-loop oracle on random cases") {
  SplitMix64 rng(7);
  const int64_t channel_choices[] = {1, 2, 3};
  const int64_t kernel_choices[] = {1, 3, 5};
  for (int trial = 0; trial < 40; ++trial) {
    int64_t ci = channel_choices[rng.next_below(3)];
    int64_t co = channel_choices[rng.next_below(3)];
    int64_t z = 1 + static_cast<int64_t>(rng.next_below(6));
    int64_t y = 1 + static_cast<int64_t>(rng.next_below(6));
    int64_t x = 1 + static_cast<int64_t>(rng.next_below(6));
    int64_t kz = std::min(kernel_choices[rng.next_below(3)], 2 * z - 1);
    int64_t ky = std::min(kernel_choices[rng.next_below(3)], 2 * y - 1);
    int64_t kx = std::min(kernel_choices[rng.next_below(3)], 2 * x - 1);
    if (kz % 2 == 0) kz = 1;
    if (ky % 2 == 0) ky = 1;
    if (kx % 2 == 0) kx = 1;
    int stride = rng.next_bool() ? 1 : 2;
    auto input = random_tensor<float>(rng, 1 + static_cast<int64_t>(rng.next_below(2)), ci, z, y, x);
    ConvWeights<float> k(co, ci, kz, ky, kx, stride);
    fill_uniform(k.w, rng);
    fill_uniform(k.b, rng);
    auto got = conv3d(input, k);
    auto want = oracles::conv3d_reference(input, k);
    REQUIRE(got.shape == want.shape);
    CHECK(oracles::max_scaled_err(got, want) < 1e-5);
  }
}

TEST_CASE("conv3d stride 1 preserves spatial shape for odd kernels") {
  SplitMix64 rng(11);
  for (int64_t k : {1, 3, 5}) {
    auto x = random_tensor<float>(rng, 1, 2, 4, 5, 3);
    ConvWeights<float> w(3, 2, k, std::min<int64_t>(k, 5), 1);
    fill_uniform(w.w, rng);
    auto y = conv3d(x, w);
    CHECK(y.z() == x.z());
    CHECK(y.y() == x.y());
    CHECK(y.x() == x.x());
  }
}

TEST_CASE("conv3d stride 2 output extents are ceil(extent/2)") {
  Tensor5<float> x(1, 1, 5, 8, 7);
  ConvWeights<float> k(2, 1, 3, 3, 3, 2);
  auto y = conv3d(x, k);
  CHECK(y.z() == 3);
  CHECK(y.y() == 4);
  CHECK(y.x() == 4);
}

TEST_CASE("conv3d rejects shape mismatches with diagnostics") {
  Tensor5<float> x(1, 2, 4, 4, 4);
  ConvWeights<float> k(3, 3, 3, 3, 3);
  CHECK_THROWS_WITH_AS(conv3d(x, k), doctest::Contains("channels mismatch"),
                       std::invalid_argument);
  Tensor5<float> empty(1, 2, 0, 4, 4);
  ConvWeights<float> k2(3, 2, 3, 3, 3);
  CHECK_THROWS_AS(conv3d(empty, k2), std::invalid_argument);
  CHECK_THROWS_AS(ConvWeights<float>(1, 2, 3, 3, 4), std::invalid_argument);  // even kernel
  CHECK_THROWS_AS(ConvWeights<float>(1, 2, 3, 3, 3, 4), std::invalid_argument);  // bad stride
}

TEST_CASE("conv3d determinism: repeated runs are bitwise identical") {
  SplitMix64 rng(13);
  auto x = random_tensor<float>(rng, 2, 3, 6, 6, 6);
  ConvWeights<float> k(4, 3, 3, 3, 3);
  fill_uniform(k.w, rng);
  fill_uniform(k.b, rng);
  auto a = conv3d(x, k);
  auto b = conv3d(x, k);
  CHECK(a.data == b.data);
}

TEST_CASE("conv3d_grad zero cotangent gives zero gradients") {
  SplitMix64 rng(17);
  auto x = random_tensor<float>(rng, 1, 2, 3, 3, 3);
  ConvWeights<float> k(2, 2, 3, 3, 3);
  fill_uniform(k.w, rng);
  Tensor5<float> dy(1, 2, 3, 3, 3);
  auto g = conv3d_grad(x, k, dy);
  for (float v : g.dx.data) CHECK(v == 0.0f);
  for (float v : g.dk.w.data) CHECK(v == 0.0f);
  for (float v : g.dk.b) CHECK(v == 0.0f);
}

TEST_CASE("conv3d_grad identity kernel adjoint") {
  SplitMix64 rng(19);
  auto x = random_tensor<float>(rng, 1, 1, 2, 2, 2);
  ConvWeights<float> k(1, 1, 1, 1, 1);
  const float w = 0.5f;
  k.w.data[0] = w;
  auto dy = random_tensor<float>(rng, 1, 1, 2, 2, 2);
  auto g = conv3d_grad(x, k, dy);
  float dy_sum = 0.0f;
  for (size_t i = 0; i < dy.data.size(); ++i) {
    CHECK(g.dx.data[i] == doctest::Approx(w * dy.data[i]));
    dy_sum += dy.data[i];
  }
  CHECK(g.dk.b[0] == doctest::Approx(dy_sum));
}

TEST_CASE("conv3d_grad rejects mismatched cotangent") {
  Tensor5<float> x(1, 2, 4, 4, 4);
  ConvWeights<float> k(2, 2, 3, 3, 3);
  Tensor5<float> dy(1, 2, 3, 4, 4);
  CHECK_THROWS_AS(conv3d_grad(x, k, dy), std::invalid_argument);
}

// Finite-difference checks run in 64-bit against sum(dy * op(...)).
TEST_CASE("conv3d_grad matches finite differences") {
  for (int stride : {1, 2}) {
    SplitMix64 rng(23 + stride);
    Tensor5<double> x(1, 2, 3, 3, 3);
    fill_uniform(x, rng);
    ConvWeights<double> k(3, 2, 3, 3, 3, stride);
    fill_uniform(k.w, rng);
    fill_uniform(k.b, rng);
    auto out_shape = conv3d(x, k).shape;
    Tensor5<double> dy(out_shape);
    fill_uniform(dy, rng);

    auto g = conv3d_grad(x, k, dy);

    auto objective = [&]() {
      auto y = conv3d(x, k);
      double s = 0.0;
      for (size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * dy.data[i];
      return s;
    };

    CHECK(oracles::fd_check(x.data, objective, g.dx.data) < 1e-6);
    CHECK(oracles::fd_check(k.w.data, objective, g.dk.w.data) < 1e-6);
    CHECK(oracles::fd_check(k.b, objective, g.dk.b) < 1e-6);
  }
}

TEST_CASE("relu basics") {
  Tensor5<float> x(1, 1, 1, 1, 3);
  x.data = {-1.0f, 0.0f, 2.0f};
  auto y = relu(x);
  CHECK(y.data == std::vector<float>{0.0f, 0.0f, 2.0f});

  Tensor5<float> neg(1, 1, 2, 2, 2);
  neg.fill(-3.5f);
  auto zero = relu(neg);
  for (float v : zero.data) CHECK(v == 0.0f);
}

TEST_CASE("relu gradient matches finite differences away from the kink") {
  SplitMix64 rng(29);
  Tensor5<double> x(1, 2, 3, 3, 3);
  oracles::fill_away_from_zero(x, rng);
  Tensor5<double> dy(x.shape);
  fill_uniform(dy, rng);
  auto dx = relu_grad(relu(x), dy);
  auto objective = [&]() {
    auto y = relu(x);
    double s = 0.0;
    for (size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * dy.data[i];
    return s;
  };
  CHECK(oracles::fd_check(x.data, objective, dx.data) < 1e-6);
}

TEST_CASE("upsample_nearest replicates voxels") {
  Tensor5<float> x(1, 1, 1, 1, 2);
  x.data = {3.0f, 7.0f};
  auto y = upsample_nearest(x, 2);
  CHECK(y.shape == std::array<int64_t, 5>{1, 1, 2, 2, 4});
  for (int64_t z = 0; z < 2; ++z)
    for (int64_t yy = 0; yy < 2; ++yy) {
      const float* row = y.row(0, 0, z, yy);
      CHECK(row[0] == 3.0f);
      CHECK(row[1] == 3.0f);
      CHECK(row[2] == 7.0f);
      CHECK(row[3] == 7.0f);
    }
}

TEST_CASE("upsample_nearest factor 1 is identity") {
  SplitMix64 rng(31);
  auto x = random_tensor<float>(rng, 1, 2, 2, 3, 2);
  auto y = upsample_nearest(x, 1);
  CHECK(y.data == x.data);
}

TEST_CASE("upsample_nearest gradient is block sum, matches finite differences") {
  SplitMix64 rng(37);
  Tensor5<double> x(1, 1, 2, 2, 2);
  fill_uniform(x, rng);
  Tensor5<double> dy(1, 1, 4, 4, 4);
  fill_uniform(dy, rng);
  auto dx = upsample_nearest_grad(x.shape, 2, dy);
  auto objective = [&]() {
    auto y = upsample_nearest(x, 2);
    double s = 0.0;
    for (size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * dy.data[i];
    return s;
  };
  CHECK(oracles::fd_check(x.data, objective, dx.data) < 1e-6);
}

TEST_CASE("concat_channels ordering and round trip") {
  SplitMix64 rng(41);
  auto a = random_tensor<float>(rng, 2, 2, 2, 2, 2);
  auto b = random_tensor<float>(rng, 2, 3, 2, 2, 2);

  auto single = concat_channels<float>({&a});
  CHECK(single.data == a.data);

  auto both = concat_channels<float>({&a, &b});
  CHECK(both.c() == 5);
  CHECK(both.at(1, 0, 1, 0, 1) == a.at(1, 0, 1, 0, 1));
  CHECK(both.at(1, 2, 1, 0, 1) == b.at(1, 0, 1, 0, 1));

  auto parts = split_channels(both, {2, 3});
  CHECK(parts[0].data == a.data);
  CHECK(parts[1].data == b.data);

  Tensor5<float> mismatch(2, 1, 3, 2, 2);
  CHECK_THROWS_AS(concat_channels<float>({&a, &mismatch}), std::invalid_argument);
}

TEST_CASE("eltwise_add basics and gradient") {
  SplitMix64 rng(43);
  auto a = random_tensor<float>(rng, 1, 2, 2, 2, 2);
  Tensor5<float> zeros(a.shape);
  auto same = eltwise_add(a, zeros);
  CHECK(same.data == a.data);

  auto b = random_tensor<float>(rng, 1, 2, 2, 2, 2);
  auto ab = eltwise_add(a, b);
  auto ba = eltwise_add(b, a);
  CHECK(ab.data == ba.data);

  Tensor5<float> bad(1, 2, 2, 2, 3);
  CHECK_THROWS_AS(eltwise_add(a, bad), std::invalid_argument);

  // gradient passes dy to both inputs; check via finite differences
  Tensor5<double> xa(1, 2, 2, 2, 2), xb(1, 2, 2, 2, 2), dy(1, 2, 2, 2, 2);
  fill_uniform(xa, rng);
  fill_uniform(xb, rng);
  fill_uniform(dy, rng);
  auto objective = [&]() {
    auto y = eltwise_add(xa, xb);
    double s = 0.0;
    for (size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * dy.data[i];
    return s;
  };
  CHECK(oracles::fd_check(xa.data, objective, dy.data) < 1e-6);
  CHECK(oracles::fd_check(xb.data, objective, dy.data) < 1e-6);
}

TEST_CASE("softmax_channels normalization, shift invariance, uniform logits") {
  SplitMix64 rng(47);
  Tensor5<float> uniform(1, 4, 2, 2, 2);
  uniform.fill(0.7f);
  auto u = softmax_channels(uniform);
  for (float v : u.data) CHECK(v == doctest::Approx(0.25f));

  auto x = random_tensor<float>(rng, 1, 3, 3, 3, 3);
  auto p = softmax_channels(x);
  const int64_t plane = x.spatial();
  for (int64_t v = 0; v < plane; ++v) {
    float sum = 0.0f;
    for (int64_t c = 0; c < 3; ++c) {
      float pv = p.data[static_cast<size_t>(c * plane + v)];
      CHECK(pv >= 0.0f);
      CHECK(pv <= 1.0f);
      sum += pv;
    }
    CHECK(sum == doctest::Approx(1.0f).epsilon(1e-6));
  }

  auto shifted = x;
  for (int64_t c = 0; c < 3; ++c) shifted.data[static_cast<size_t>(c * plane + 5)] += 2.5f;
  auto p2 = softmax_channels(shifted);
  for (int64_t c = 0; c < 3; ++c)
    CHECK(p2.data[static_cast<size_t>(c * plane + 5)] ==
          doctest::Approx(p.data[static_cast<size_t>(c * plane + 5)]).epsilon(1e-6));
}

TEST_CASE("softmax_channels gradient matches finite differences") {
  SplitMix64 rng(53);
  Tensor5<double> x(1, 4, 2, 2, 2);
  fill_uniform(x, rng);
  Tensor5<double> dy(x.shape);
  fill_uniform(dy, rng);
  auto probs = softmax_channels(x);
  auto dx = softmax_channels_grad(probs, dy);
  auto objective = [&]() {
    auto p = softmax_channels(x);
    double s = 0.0;
    for (size_t i = 0; i < p.data.size(); ++i) s += p.data[i] * dy.data[i];
    return s;
  };
  CHECK(oracles::fd_check(x.data, objective, dx.data) < 1e-6);
}
