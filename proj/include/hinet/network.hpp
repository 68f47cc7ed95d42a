#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hinet/blocks.hpp"
#include "hinet/ops.hpp"
#include "hinet/rng.hpp"

namespace hinet {

struct NetworkConfig {
  int levels = 4;
  int64_t base_filters = 8;
  std::vector<int> repetitions = {1, 2, 3, 4};
  BlockVariant block_variant = BlockVariant::Hyperdense;
  int64_t num_classes = 4;
  int64_t in_channels = 4;
  uint64_t seed = 0;

  int64_t width(int level) const { return base_filters << level; }
  int64_t spatial_divisor() const { return int64_t(1) << (levels - 1); }

  void validate() const {
    if (levels < 1) throw std::invalid_argument("NetworkConfig: levels must be >= 1");
    if (base_filters < 1) throw std::invalid_argument("NetworkConfig: base_filters must be >= 1");
    if (num_classes < 1) throw std::invalid_argument("NetworkConfig: num_classes must be >= 1");
    if (in_channels < 1) throw std::invalid_argument("NetworkConfig: in_channels must be >= 1");
    if (static_cast<int>(repetitions.size()) != levels)
      throw std::invalid_argument("NetworkConfig: repetitions length " +
                                  std::to_string(repetitions.size()) + " != levels " +
                                  std::to_string(levels));
    int max_rep = 0;
    for (int r : repetitions) {
      if (r < 1) throw std::invalid_argument("NetworkConfig: repetitions must be >= 1");
      max_rep = std::max(max_rep, r);
    }
    if (repetitions.back() != max_rep)
      throw std::invalid_argument(
          "NetworkConfig: the maximum repetition must sit at the deepest level");
  }
};

inline int64_t branch_width(int64_t c_in) { return std::max<int64_t>(1, c_in / 2); }

// The assembled encoder-decoder. Parameters live in the structure below; the
// registry (stable path-like names in a fixed order) is exposed through
// visit_params and is the contract for checkpoints, Adam state and gradients.
template <typename T>
struct Network {
  NetworkConfig cfg;

  ConvWeights<T> stem;  // in_channels -> width(0), 3x3x3
  struct EncLevel {
    std::vector<BlockParams<T>> blocks;
    ConvWeights<T> down;  // absent on the deepest level
    bool has_down = false;
  };
  std::vector<EncLevel> enc;
  struct DecLevel {
    int level = 0;         // encoder level this entry restores
    ConvWeights<T> up;     // 1x1x1 conv to the skip width
    BlockParams<T> block;  // one block at 2*width(level)
  };
  std::vector<DecLevel> dec;  // executed deep-to-shallow
  ConvWeights<T> head;        // 1x1x1 conv to num_classes

  uint64_t stamp = 0;  // build identity, checked against caches

  int64_t head_in_channels() const { return cfg.levels == 1 ? cfg.width(0) : 2 * cfg.width(0); }

  template <typename F>
  void visit_params(F&& f) {
    f("stem", stem);
    for (int l = 0; l < cfg.levels; ++l) {
      auto& level = enc[static_cast<size_t>(l)];
      for (size_t i = 0; i < level.blocks.size(); ++i)
        visit_block(std::string("enc.L") + std::to_string(l) + ".block" + std::to_string(i),
                    level.blocks[i], f);
      if (level.has_down) f("enc.L" + std::to_string(l) + ".down", level.down);
    }
    for (auto& d : dec) {
      const std::string base = "dec.L" + std::to_string(d.level);
      f(base + ".up", d.up);
      visit_block(base + ".block0", d.block, f);
    }
    f("head", head);
  }

  template <typename B, typename F>
  static void visit_block(const std::string& base, B& block, F&& f) {
    for (int v = 0; v < 3; ++v)
      f(base + ".stage1." + view_name(kViewOrder[static_cast<size_t>(v)]),
        block.stage1[static_cast<size_t>(v)]);
    for (int v = 0; v < 3; ++v)
      f(base + ".stage2." + view_name(kViewOrder[static_cast<size_t>(v)]),
        block.stage2[static_cast<size_t>(v)]);
    f(base + ".proj", block.proj);
  }

  int64_t count_params() {
    int64_t total = 0;
    visit_params([&](const std::string&, ConvWeights<T>& p) { total += p.param_count(); });
    return total;
  }
};

// Gradient registry: mirrors the Network structure and visit order exactly.
template <typename T>
struct NetGrads {
  ConvWeights<T> stem;
  struct EncLevel {
    std::vector<BlockGrads<T>> blocks;
    ConvWeights<T> down;
    bool has_down = false;
  };
  std::vector<EncLevel> enc;
  struct DecLevel {
    int level = 0;
    ConvWeights<T> up;
    BlockGrads<T> block;
  };
  std::vector<DecLevel> dec;
  ConvWeights<T> head;
  int levels = 0;

  static NetGrads zeros_like(const Network<T>& net) {
    NetGrads g;
    g.levels = net.cfg.levels;
    g.stem = ConvWeights<T>::zeros_like(net.stem);
    g.enc.resize(net.enc.size());
    for (size_t l = 0; l < net.enc.size(); ++l) {
      for (const auto& b : net.enc[l].blocks)
        g.enc[l].blocks.push_back(BlockGrads<T>::zeros_like(b));
      g.enc[l].has_down = net.enc[l].has_down;
      if (net.enc[l].has_down) g.enc[l].down = ConvWeights<T>::zeros_like(net.enc[l].down);
    }
    g.dec.resize(net.dec.size());
    for (size_t i = 0; i < net.dec.size(); ++i) {
      g.dec[i].level = net.dec[i].level;
      g.dec[i].up = ConvWeights<T>::zeros_like(net.dec[i].up);
      g.dec[i].block = BlockGrads<T>::zeros_like(net.dec[i].block);
    }
    g.head = ConvWeights<T>::zeros_like(net.head);
    return g;
  }

  template <typename F>
  void visit_params(F&& f) {
    f("stem", stem);
    for (int l = 0; l < levels; ++l) {
      auto& level = enc[static_cast<size_t>(l)];
      for (size_t i = 0; i < level.blocks.size(); ++i)
        Network<T>::visit_block(
            std::string("enc.L") + std::to_string(l) + ".block" + std::to_string(i),
            level.blocks[i], f);
      if (level.has_down) f("enc.L" + std::to_string(l) + ".down", level.down);
    }
    for (auto& d : dec) {
      const std::string base = "dec.L" + std::to_string(d.level);
      f(base + ".up", d.up);
      Network<T>::visit_block(base + ".block0", d.block, f);
    }
    f("head", head);
  }
};

namespace detail {
inline std::atomic<uint64_t> g_network_stamp{1};
}

// Builds the network from the config: encoder levels of repeated blocks with
// stride-2 transitions, a decoder of one up-transition plus one block per
// level, and the softmax head. Weights come from a fan-in-scaled uniform
// (bound sqrt(6/fan_in)) drawn in registry order from a splitmix64 stream;
// biases start at zero.
template <typename T>
Network<T> build_hinet(const NetworkConfig& cfg) {
  cfg.validate();
  Network<T> net;
  net.cfg = cfg;

  net.stem = ConvWeights<T>(cfg.width(0), cfg.in_channels, 3, 3, 3);
  net.enc.resize(static_cast<size_t>(cfg.levels));
  for (int l = 0; l < cfg.levels; ++l) {
    auto& level = net.enc[static_cast<size_t>(l)];
    const int64_t w = cfg.width(l);
    for (int i = 0; i < cfg.repetitions[static_cast<size_t>(l)]; ++i)
      level.blocks.push_back(BlockParams<T>::make(cfg.block_variant, w, branch_width(w)));
    if (l + 1 < cfg.levels) {
      level.down = ConvWeights<T>(cfg.width(l + 1), w, 3, 3, 3, 2);
      level.has_down = true;
    }
  }
  int64_t carried = cfg.width(cfg.levels - 1);  // channels flowing out of the deepest level
  for (int l = cfg.levels - 2; l >= 0; --l) {
    typename Network<T>::DecLevel d;
    d.level = l;
    const int64_t skip_c = cfg.width(l);
    d.up = ConvWeights<T>(skip_c, carried, 1, 1, 1);
    carried = 2 * skip_c;
    d.block = BlockParams<T>::make(cfg.block_variant, carried, branch_width(carried));
    net.dec.push_back(std::move(d));
  }
  net.head = ConvWeights<T>(cfg.num_classes, net.head_in_channels(), 1, 1, 1);

  // decoder symmetry walk on the minimal legal input extent: every up must
  // land exactly on its skip's extent
  {
    int64_t e = cfg.spatial_divisor();
    std::vector<int64_t> enc_extents;
    for (int l = 0; l < cfg.levels; ++l) {
      enc_extents.push_back(e);
      if (l + 1 < cfg.levels) e = (e + 1) / 2;
    }
    int64_t cur = enc_extents.back();
    for (const auto& d : net.dec) {
      cur *= 2;
      if (cur != enc_extents[static_cast<size_t>(d.level)])
        throw std::logic_error("build_hinet: decoder/encoder extent mismatch at level " +
                               std::to_string(d.level));
    }
  }

  SplitMix64 rng(cfg.seed);
  net.visit_params([&](const std::string& name, ConvWeights<T>& p) {
    const double fan_in = static_cast<double>(p.c_in() * p.kz() * p.ky() * p.kx());
    double bound = std::sqrt(6.0 / fan_in);
    // residual projections start damped so activation variance stays bounded
    // with deep block stacks; the head starts small so the initial class
    // logits sit near the softmax's soft regime
    if (name.size() > 5 && name.compare(name.size() - 5, 5, ".proj") == 0) bound *= 0.7;
    if (name == "head") bound *= 0.25;
    for (auto& v : p.w.data) v = static_cast<T>(rng.next_uniform(-bound, bound));
    // biases stay zero
  });
  net.stamp = detail::g_network_stamp.fetch_add(1);
  return net;
}

template <typename T>
struct ForwardCache {
  uint64_t stamp = 0;
  Tensor5<T> input;
  Tensor5<T> stem_out;  // post-relu
  struct EncCache {
    std::vector<BlockCache<T>> blocks;
    Tensor5<T> level_out;  // feeds both the skip and the down transition
    Tensor5<T> down_out;   // post-relu
  };
  std::vector<EncCache> enc;
  struct DecCache {
    UpCache<T> up;
    Tensor5<T> up_out;  // concatenated transition output
    BlockCache<T> block;
    Tensor5<T> block_out;
  };
  std::vector<DecCache> dec;
  Tensor5<T> probs;

  const Tensor5<T>& head_input() const {
    return dec.empty() ? enc.back().level_out : dec.back().block_out;
  }
};

// Full forward pass; the cache holds every intermediate backward needs.
template <typename T>
Tensor5<T> forward(const Network<T>& net, const Tensor5<T>& x, ForwardCache<T>& cache) {
  const auto& cfg = net.cfg;
  if (x.c() != cfg.in_channels)
    throw std::invalid_argument("forward: input channels " + std::to_string(x.c()) +
                                " != configured in_channels " + std::to_string(cfg.in_channels));
  const int64_t div = cfg.spatial_divisor();
  for (int a = 2; a < 5; ++a)
    if (x.shape[a] == 0 || x.shape[a] % div != 0)
      throw std::invalid_argument("forward: spatial extents of " + shape_str(x.shape) +
                                  " must be divisible by " + std::to_string(div));

  cache = ForwardCache<T>();
  cache.stamp = net.stamp;
  cache.input = x;
  cache.stem_out = relu(conv3d(x, net.stem));
  cache.enc.resize(net.enc.size());

  const Tensor5<T>* cur = &cache.stem_out;
  for (size_t l = 0; l < net.enc.size(); ++l) {
    const auto& lvl = net.enc[l];
    auto& lc = cache.enc[l];
    lc.blocks.resize(lvl.blocks.size());
    Tensor5<T> h = *cur;
    for (size_t i = 0; i < lvl.blocks.size(); ++i)
      h = block_forward(h, lvl.blocks[i], &lc.blocks[i]);
    lc.level_out = std::move(h);
    if (lvl.has_down) {
      lc.down_out = down_transition(lc.level_out, lvl.down);
      cur = &lc.down_out;
    } else {
      cur = &lc.level_out;
    }
  }

  cache.dec.resize(net.dec.size());
  for (size_t i = 0; i < net.dec.size(); ++i) {
    const auto& d = net.dec[i];
    auto& dc = cache.dec[i];
    const Tensor5<T>& skip = cache.enc[static_cast<size_t>(d.level)].level_out;
    dc.up_out = up_transition(*cur, skip, d.up, &dc.up);
    dc.block_out = block_forward(dc.up_out, d.block, &dc.block);
    cur = &dc.block_out;
  }

  cache.probs = softmax_channels(conv3d(*cur, net.head));
  return cache.probs;
}

// Reverse pass: one gradient per parameter, same registry names and shapes.
// Gradients with respect to the network input are discarded.
template <typename T>
NetGrads<T> backward(const Network<T>& net, const ForwardCache<T>& cache,
                     const Tensor5<T>& dprobs) {
  if (cache.stamp != net.stamp)
    throw std::invalid_argument("backward: cache is stale or belongs to a different network");
  if (!dprobs.same_shape(cache.probs))
    throw std::invalid_argument("backward: cotangent shape " + shape_str(dprobs.shape) +
                                " != probs shape " + shape_str(cache.probs.shape));

  NetGrads<T> g = NetGrads<T>::zeros_like(net);

  auto dlogits = softmax_channels_grad(cache.probs, dprobs);
  auto ghead = conv3d_grad(cache.head_input(), net.head, dlogits);
  accumulate(g.head, ghead.dk);
  Tensor5<T> d = std::move(ghead.dx);

  std::vector<Tensor5<T>> skip_grads(net.enc.size());
  for (size_t i = net.dec.size(); i-- > 0;) {
    const auto& dl = net.dec[i];
    d = block_backward(dl.block, cache.dec[i].block, d, g.dec[i].block);
    auto [d_coarse, d_skip] =
        up_transition_backward(dl.up, cache.dec[i].up, net.cfg.width(dl.level), d, g.dec[i].up);
    auto& sg = skip_grads[static_cast<size_t>(dl.level)];
    if (sg.numel() == 0)
      sg = std::move(d_skip);
    else
      for (size_t j = 0; j < sg.data.size(); ++j) sg.data[j] += d_skip.data[j];
    d = std::move(d_coarse);
  }

  for (size_t l = net.enc.size(); l-- > 0;) {
    const auto& lvl = net.enc[l];
    auto& lc = cache.enc[l];
    Tensor5<T> dout;
    if (l + 1 == net.enc.size()) {
      dout = std::move(d);  // deepest level output feeds the decoder (or head)
    } else {
      auto dz = relu_grad(lc.down_out, d);
      auto gd = conv3d_grad(lc.level_out, lvl.down, dz);
      accumulate(g.enc[l].down, gd.dk);
      dout = std::move(gd.dx);
    }
    if (skip_grads[l].numel() != 0)
      for (size_t j = 0; j < dout.data.size(); ++j) dout.data[j] += skip_grads[l].data[j];
    for (size_t b = lvl.blocks.size(); b-- > 0;)
      dout = block_backward(lvl.blocks[b], lc.blocks[b], dout, g.enc[l].blocks[b]);
    d = std::move(dout);
  }

  auto dz = relu_grad(cache.stem_out, d);
  auto gs = conv3d_grad(cache.input, net.stem, dz);
  accumulate(g.stem, gs.dk);
  return g;
}

// Analytic parameter count derived from the config alone; must agree exactly
// with count_params over the built registry.
inline int64_t conv_param_count(int64_t c_out, int64_t c_in, int64_t kz, int64_t ky, int64_t kx) {
  return c_out * c_in * kz * ky * kx + c_out;
}

inline int64_t block_param_count(int64_t c_in, int64_t c_b, BlockVariant variant) {
  const int64_t s2_in = variant == BlockVariant::Hyperdense ? 3 * c_b : c_b;
  int64_t total = 0;
  total += 3 * conv_param_count(c_b, c_in, 1, 3, 3);   // stage 1, all views have 9 taps
  total += 3 * conv_param_count(c_b, s2_in, 1, 3, 3);  // stage 2
  total += conv_param_count(c_in, 3 * c_b, 1, 1, 1);   // projection
  return total;
}

inline int64_t closed_form_count(const NetworkConfig& cfg) {
  cfg.validate();
  int64_t total = conv_param_count(cfg.width(0), cfg.in_channels, 3, 3, 3);  // stem
  for (int l = 0; l < cfg.levels; ++l) {
    const int64_t w = cfg.width(l);
    total += cfg.repetitions[static_cast<size_t>(l)] *
             block_param_count(w, branch_width(w), cfg.block_variant);
    if (l + 1 < cfg.levels) total += conv_param_count(cfg.width(l + 1), w, 3, 3, 3);
  }
  int64_t carried = cfg.width(cfg.levels - 1);
  for (int l = cfg.levels - 2; l >= 0; --l) {
    const int64_t skip_c = cfg.width(l);
    total += conv_param_count(skip_c, carried, 1, 1, 1);
    carried = 2 * skip_c;
    total += block_param_count(carried, branch_width(carried), cfg.block_variant);
  }
  const int64_t head_in = cfg.levels == 1 ? cfg.width(0) : 2 * cfg.width(0);
  total += conv_param_count(cfg.num_classes, head_in, 1, 1, 1);
  return total;
}

}  // namespace hinet
