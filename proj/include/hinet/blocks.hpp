#pragma once

#include <array>
#include <string>
#include <type_traits>
#include <utility>

#include "hinet/ops.hpp"

namespace hinet {

// Orthogonal-view kernels over (z, y, x): each view leaves exactly one
// spatial axis unmixed.
enum class ViewAxis { Axial, Coronal, Sagittal };

constexpr std::array<ViewAxis, 3> kViewOrder = {ViewAxis::Axial, ViewAxis::Coronal,
                                                ViewAxis::Sagittal};

inline std::array<int64_t, 3> view_kernel_extents(ViewAxis v) {
  switch (v) {
    case ViewAxis::Axial: return {1, 3, 3};
    case ViewAxis::Coronal: return {3, 1, 3};
    default: return {3, 3, 1};
  }
}

inline const char* view_name(ViewAxis v) {
  switch (v) {
    case ViewAxis::Axial: return "axial";
    case ViewAxis::Coronal: return "coronal";
    default: return "sagittal";
  }
}

enum class BlockVariant { Hyperdense, Baseline };

inline const char* variant_name(BlockVariant v) {
  return v == BlockVariant::Hyperdense ? "hyperdense" : "baseline";
}

// One residual inception block: two stages of three parallel view branches,
// a 1x1x1 projection back to c_in, and the residual add. In the hyperdense
// variant every stage-2 branch consumes the concatenation of all three
// stage-1 views; the baseline keeps the branches separate.
template <typename T>
struct BlockParams {
  BlockVariant variant = BlockVariant::Hyperdense;
  int64_t c_in = 0;
  int64_t c_b = 0;
  std::array<ConvWeights<T>, 3> stage1;
  std::array<ConvWeights<T>, 3> stage2;
  ConvWeights<T> proj;

  static BlockParams make(BlockVariant variant, int64_t c_in, int64_t c_b) {
    BlockParams p;
    p.variant = variant;
    p.c_in = c_in;
    p.c_b = c_b;
    const int64_t s2_in = variant == BlockVariant::Hyperdense ? 3 * c_b : c_b;
    for (int v = 0; v < 3; ++v) {
      auto ext = view_kernel_extents(kViewOrder[static_cast<size_t>(v)]);
      p.stage1[static_cast<size_t>(v)] = ConvWeights<T>(c_b, c_in, ext[0], ext[1], ext[2]);
      p.stage2[static_cast<size_t>(v)] = ConvWeights<T>(c_b, s2_in, ext[0], ext[1], ext[2]);
    }
    p.proj = ConvWeights<T>(c_in, 3 * c_b, 1, 1, 1);
    return p;
  }

  void validate() const {
    const int64_t s2_in = variant == BlockVariant::Hyperdense ? 3 * c_b : c_b;
    for (int v = 0; v < 3; ++v) {
      auto ext = view_kernel_extents(kViewOrder[static_cast<size_t>(v)]);
      const auto& s1 = stage1[static_cast<size_t>(v)];
      const auto& s2 = stage2[static_cast<size_t>(v)];
      if (s1.kz() != ext[0] || s1.ky() != ext[1] || s1.kx() != ext[2] || s1.c_in() != c_in ||
          s1.c_out() != c_b)
        throw std::invalid_argument(std::string("BlockParams: stage-1 ") +
                                    view_name(kViewOrder[static_cast<size_t>(v)]) +
                                    " weights violate the channel plan: " + shape_str(s1.w.shape));
      if (s2.kz() != ext[0] || s2.ky() != ext[1] || s2.kx() != ext[2] || s2.c_in() != s2_in ||
          s2.c_out() != c_b)
        throw std::invalid_argument(std::string("BlockParams: stage-2 ") +
                                    view_name(kViewOrder[static_cast<size_t>(v)]) +
                                    " weights violate the channel plan: " + shape_str(s2.w.shape));
    }
    if (proj.c_in() != 3 * c_b || proj.c_out() != c_in || proj.kz() != 1 || proj.ky() != 1 ||
        proj.kx() != 1)
      throw std::invalid_argument("BlockParams: projection must map 3*c_b -> c_in with a 1x1x1 "
                                  "kernel, got " + shape_str(proj.w.shape));
  }

  int64_t param_count() const {
    int64_t total = proj.param_count();
    for (int v = 0; v < 3; ++v)
      total += stage1[static_cast<size_t>(v)].param_count() +
               stage2[static_cast<size_t>(v)].param_count();
    return total;
  }
};

template <typename T>
struct BlockGrads {
  std::array<ConvWeights<T>, 3> stage1;
  std::array<ConvWeights<T>, 3> stage2;
  ConvWeights<T> proj;

  static BlockGrads zeros_like(const BlockParams<T>& p) {
    BlockGrads g;
    for (int v = 0; v < 3; ++v) {
      g.stage1[static_cast<size_t>(v)] =
          ConvWeights<T>::zeros_like(p.stage1[static_cast<size_t>(v)]);
      g.stage2[static_cast<size_t>(v)] =
          ConvWeights<T>::zeros_like(p.stage2[static_cast<size_t>(v)]);
    }
    g.proj = ConvWeights<T>::zeros_like(p.proj);
    return g;
  }
};

template <typename T>
struct BlockCache {
  Tensor5<T> input;
  std::array<Tensor5<T>, 3> s1;  // post-relu stage-1 view outputs
  Tensor5<T> s2_input;           // concat of s1, hyperdense only
  std::array<Tensor5<T>, 3> s2;  // post-relu stage-2 view outputs
  Tensor5<T> s2_concat;          // projection input
};

// Anisotropic view convolution followed by relu. Stride is always 1.
template <typename T>
Tensor5<T> view_conv(const Tensor5<T>& x, ViewAxis view, const ConvWeights<T>& k) {
  auto ext = view_kernel_extents(view);
  if (k.kz() != ext[0] || k.ky() != ext[1] || k.kx() != ext[2])
    throw std::invalid_argument(std::string("view_conv: kernel ") + shape_str(k.w.shape) +
                                " does not match the " + view_name(view) + " pattern");
  if (k.stride != 1) throw std::invalid_argument("view_conv: stride must be 1");
  return relu(conv3d(x, k));
}

template <typename T>
Tensor5<T> block_forward(const Tensor5<T>& x, const BlockParams<T>& p,
                         std::type_identity_t<BlockCache<T>>* cache = nullptr) {
  p.validate();
  if (x.c() != p.c_in)
    throw std::invalid_argument("block: input channels " + std::to_string(x.c()) +
                                " != c_in " + std::to_string(p.c_in));
  BlockCache<T> local;
  BlockCache<T>& cc = cache ? *cache : local;
  cc.input = x;
  for (int v = 0; v < 3; ++v)
    cc.s1[static_cast<size_t>(v)] =
        view_conv(x, kViewOrder[static_cast<size_t>(v)], p.stage1[static_cast<size_t>(v)]);
  if (p.variant == BlockVariant::Hyperdense) {
    cc.s2_input = concat_channels<T>({&cc.s1[0], &cc.s1[1], &cc.s1[2]});
    for (int v = 0; v < 3; ++v)
      cc.s2[static_cast<size_t>(v)] = view_conv(cc.s2_input, kViewOrder[static_cast<size_t>(v)],
                                                p.stage2[static_cast<size_t>(v)]);
  } else {
    for (int v = 0; v < 3; ++v)
      cc.s2[static_cast<size_t>(v)] =
          view_conv(cc.s1[static_cast<size_t>(v)], kViewOrder[static_cast<size_t>(v)],
                    p.stage2[static_cast<size_t>(v)]);
  }
  cc.s2_concat = concat_channels<T>({&cc.s2[0], &cc.s2[1], &cc.s2[2]});
  return eltwise_add(x, conv3d(cc.s2_concat, p.proj));
}

template <typename T>
Tensor5<T> hyperdense_block(const Tensor5<T>& x, const BlockParams<T>& p,
                            std::type_identity_t<BlockCache<T>>* cache = nullptr) {
  if (p.variant != BlockVariant::Hyperdense)
    throw std::invalid_argument("hyperdense_block: params built for the baseline variant");
  return block_forward(x, p, cache);
}

template <typename T>
Tensor5<T> baseline_block(const Tensor5<T>& x, const BlockParams<T>& p,
                          std::type_identity_t<BlockCache<T>>* cache = nullptr) {
  if (p.variant != BlockVariant::Baseline)
    throw std::invalid_argument("baseline_block: params built for the hyperdense variant");
  return block_forward(x, p, cache);
}

template <typename T>
void accumulate(ConvWeights<T>& into, const ConvWeights<T>& from) {
  for (size_t i = 0; i < into.w.data.size(); ++i) into.w.data[i] += from.w.data[i];
  for (size_t i = 0; i < into.b.size(); ++i) into.b[i] += from.b[i];
}

// Reverse pass through one block. Gradients for the block's parameters are
// accumulated into g; returns the gradient with respect to the block input.
template <typename T>
Tensor5<T> block_backward(const BlockParams<T>& p, const BlockCache<T>& cache,
                          const Tensor5<T>& dout, BlockGrads<T>& g) {
  // residual: dout reaches both x and the projection output
  auto gproj = conv3d_grad(cache.s2_concat, p.proj, dout);
  accumulate(g.proj, gproj.dk);
  auto ds2 = split_channels(gproj.dx, {p.c_b, p.c_b, p.c_b});

  Tensor5<T> dx = dout;  // direct skip path
  if (p.variant == BlockVariant::Hyperdense) {
    Tensor5<T> ds2_input(cache.s2_input.shape);
    for (int v = 0; v < 3; ++v) {
      auto dz = relu_grad(cache.s2[static_cast<size_t>(v)], ds2[static_cast<size_t>(v)]);
      auto gr = conv3d_grad(cache.s2_input, p.stage2[static_cast<size_t>(v)], dz);
      accumulate(g.stage2[static_cast<size_t>(v)], gr.dk);
      for (size_t i = 0; i < ds2_input.data.size(); ++i) ds2_input.data[i] += gr.dx.data[i];
    }
    auto ds1 = split_channels(ds2_input, {p.c_b, p.c_b, p.c_b});
    for (int v = 0; v < 3; ++v) {
      auto dz = relu_grad(cache.s1[static_cast<size_t>(v)], ds1[static_cast<size_t>(v)]);
      auto gr = conv3d_grad(cache.input, p.stage1[static_cast<size_t>(v)], dz);
      accumulate(g.stage1[static_cast<size_t>(v)], gr.dk);
      for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += gr.dx.data[i];
    }
  } else {
    for (int v = 0; v < 3; ++v) {
      auto dz2 = relu_grad(cache.s2[static_cast<size_t>(v)], ds2[static_cast<size_t>(v)]);
      auto gr2 = conv3d_grad(cache.s1[static_cast<size_t>(v)], p.stage2[static_cast<size_t>(v)],
                             dz2);
      accumulate(g.stage2[static_cast<size_t>(v)], gr2.dk);
      auto dz1 = relu_grad(cache.s1[static_cast<size_t>(v)], gr2.dx);
      auto gr1 = conv3d_grad(cache.input, p.stage1[static_cast<size_t>(v)], dz1);
      accumulate(g.stage1[static_cast<size_t>(v)], gr1.dk);
      for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += gr1.dx.data[i];
    }
  }
  return dx;
}

// Fine-to-coarse transition: stride-2 3x3x3 convolution plus relu. Halves
// every spatial extent (ceil) and sets the channel count from the kernel.
template <typename T>
Tensor5<T> down_transition(const Tensor5<T>& x, const ConvWeights<T>& k) {
  if (x.z() < 2 || x.y() < 2 || x.x() < 2)
    throw std::invalid_argument("down_transition: spatial extent < 2 in input " +
                                shape_str(x.shape));
  if (k.stride != 2 || k.kz() != 3 || k.ky() != 3 || k.kx() != 3)
    throw std::invalid_argument("down_transition: kernel must be 3x3x3 with stride 2");
  return relu(conv3d(x, k));
}

template <typename T>
struct UpCache {
  Tensor5<T> coarse;     // transition input
  Tensor5<T> upsampled;  // nearest x2
  Tensor5<T> projected;  // post-relu 1x1x1 conv output
};

// Coarse-to-fine transition: nearest-neighbour x2 upsample, 1x1x1 conv to the
// skip's channel width plus relu, then concatenation with the skip.
template <typename T>
Tensor5<T> up_transition(const Tensor5<T>& x, const Tensor5<T>& skip, const ConvWeights<T>& k,
                         std::type_identity_t<UpCache<T>>* cache = nullptr) {
  if (k.kz() != 1 || k.ky() != 1 || k.kx() != 1 || k.stride != 1)
    throw std::invalid_argument("up_transition: kernel must be 1x1x1 with stride 1");
  UpCache<T> local;
  UpCache<T>& cc = cache ? *cache : local;
  cc.coarse = x;
  cc.upsampled = upsample_nearest(x, 2);
  if (cc.upsampled.z() != skip.z() || cc.upsampled.y() != skip.y() ||
      cc.upsampled.x() != skip.x() || cc.upsampled.n() != skip.n())
    throw std::invalid_argument("up_transition: upsampled shape " +
                                shape_str(cc.upsampled.shape) + " does not match skip " +
                                shape_str(skip.shape));
  cc.projected = relu(conv3d(cc.upsampled, k));
  return concat_channels<T>({&cc.projected, &skip});
}

// Returns (d_coarse, d_skip) and accumulates kernel gradients.
template <typename T>
std::pair<Tensor5<T>, Tensor5<T>> up_transition_backward(const ConvWeights<T>& k,
                                                         const UpCache<T>& cache,
                                                         int64_t skip_channels,
                                                         const Tensor5<T>& dout,
                                                         ConvWeights<T>& gk) {
  auto parts = split_channels(dout, {cache.projected.c(), skip_channels});
  auto dz = relu_grad(cache.projected, parts[0]);
  auto gr = conv3d_grad(cache.upsampled, k, dz);
  accumulate(gk, gr.dk);
  auto d_coarse = upsample_nearest_grad(cache.coarse.shape, 2, gr.dx);
  return {std::move(d_coarse), std::move(parts[1])};
}

}  // namespace hinet
