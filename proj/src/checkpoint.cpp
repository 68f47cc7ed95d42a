#include "hinet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <regex>

namespace hinet {

namespace {

constexpr char kMagic[4] = {'H', 'I', 'N', 'T'};
constexpr uint32_t kVersion = 1;
constexpr uint8_t kDtypeF32 = 0;

template <typename T>
void put(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::ifstream& f, const std::string& what) {
  T v;
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw std::runtime_error("checkpoint: truncated while reading " + what);
  return v;
}

void write_entry(std::ofstream& f, const std::string& name,
                 const std::vector<uint32_t>& extents, const float* data, size_t count) {
  put<uint16_t>(f, static_cast<uint16_t>(name.size()));
  f.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<uint8_t>(f, kDtypeF32);
  put<uint8_t>(f, static_cast<uint8_t>(extents.size()));
  for (uint32_t e : extents) put<uint32_t>(f, e);
  f.write(reinterpret_cast<const char*>(data),
          static_cast<std::streamsize>(count * sizeof(float)));
}

}  // namespace

void save_checkpoint(const std::string& path, Network<float>& net) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
  f.write(kMagic, 4);
  put<uint32_t>(f, kVersion);

  uint32_t count = 0;
  net.visit_params([&](const std::string&, ConvWeights<float>&) { count += 2; });
  put<uint32_t>(f, count);

  net.visit_params([&](const std::string& name, ConvWeights<float>& p) {
    std::vector<uint32_t> wext;
    for (int64_t e : p.w.shape) wext.push_back(static_cast<uint32_t>(e));
    write_entry(f, name + ".w", wext, p.w.data.data(), p.w.data.size());
    write_entry(f, name + ".b", {static_cast<uint32_t>(p.b.size())}, p.b.data(), p.b.size());
  });
  if (!f) throw std::runtime_error("checkpoint: write failed: " + path);
}

std::vector<CheckpointEntry> read_checkpoint_entries(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const uint32_t version = take<uint32_t>(f, "version");
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  const uint32_t count = take<uint32_t>(f, "tensor count");

  std::vector<CheckpointEntry> entries;
  entries.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    const uint16_t name_len = take<uint16_t>(f, "name length");
    e.name.resize(name_len);
    f.read(e.name.data(), name_len);
    if (!f) throw std::runtime_error("checkpoint: truncated while reading name");
    const uint8_t dtype = take<uint8_t>(f, "dtype");
    if (dtype != kDtypeF32)
      throw std::runtime_error("checkpoint: unsupported dtype code " + std::to_string(dtype) +
                               " for " + e.name);
    const uint8_t rank = take<uint8_t>(f, "rank");
    size_t numel = 1;
    for (uint8_t r = 0; r < rank; ++r) {
      const uint32_t ext = take<uint32_t>(f, "extent");
      e.extents.push_back(ext);
      numel *= ext;
    }
    e.data.resize(numel);
    f.read(reinterpret_cast<char*>(e.data.data()),
           static_cast<std::streamsize>(numel * sizeof(float)));
    if (!f)
      throw std::runtime_error("checkpoint: truncated payload for " + e.name + " in " + path);
    entries.push_back(std::move(e));
  }
  return entries;
}

NetworkConfig infer_config(const std::vector<CheckpointEntry>& entries) {
  std::map<std::string, const CheckpointEntry*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e;

  auto find = [&](const std::string& name) -> const CheckpointEntry& {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw std::runtime_error("checkpoint: registry is missing '" + name +
                               "'; not a hinet checkpoint");
    return *it->second;
  };

  const auto& stem = find("stem.w");
  if (stem.extents.size() != 5) throw std::runtime_error("checkpoint: stem.w must have rank 5");

  NetworkConfig cfg;
  cfg.base_filters = stem.extents[0];
  cfg.in_channels = stem.extents[1];
  cfg.seed = 0;

  const std::regex block_re(R"(^enc\.L(\d+)\.block(\d+)\.proj\.w$)");
  std::map<int, int> blocks_per_level;
  for (const auto& e : entries) {
    std::smatch m;
    if (std::regex_match(e.name, m, block_re)) {
      const int level = std::stoi(m[1]);
      const int idx = std::stoi(m[2]);
      blocks_per_level[level] = std::max(blocks_per_level[level], idx + 1);
    }
  }
  if (blocks_per_level.empty())
    throw std::runtime_error("checkpoint: no encoder blocks found; not a hinet checkpoint");
  cfg.levels = blocks_per_level.rbegin()->first + 1;
  cfg.repetitions.clear();
  for (int l = 0; l < cfg.levels; ++l) {
    auto it = blocks_per_level.find(l);
    if (it == blocks_per_level.end())
      throw std::runtime_error("checkpoint: encoder level " + std::to_string(l) +
                               " has no blocks");
    cfg.repetitions.push_back(it->second);
  }

  const auto& s1 = find("enc.L0.block0.stage1.axial.w");
  const auto& s2 = find("enc.L0.block0.stage2.axial.w");
  if (s1.extents.size() != 5 || s2.extents.size() != 5)
    throw std::runtime_error("checkpoint: block stages must have rank 5");
  const uint32_t c_b = s1.extents[0];
  cfg.block_variant =
      s2.extents[1] == 3 * c_b ? BlockVariant::Hyperdense : BlockVariant::Baseline;

  const auto& head = find("head.w");
  if (head.extents.size() != 5) throw std::runtime_error("checkpoint: head.w must have rank 5");
  cfg.num_classes = head.extents[0];
  return cfg;
}

Network<float> load_checkpoint(const std::string& path) {
  auto entries = read_checkpoint_entries(path);
  NetworkConfig cfg = infer_config(entries);
  Network<float> net = build_hinet<float>(cfg);

  std::map<std::string, const CheckpointEntry*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e;
  size_t used = 0;

  net.visit_params([&](const std::string& name, ConvWeights<float>& p) {
    auto wit = by_name.find(name + ".w");
    auto bit = by_name.find(name + ".b");
    if (wit == by_name.end() || bit == by_name.end())
      throw std::runtime_error("checkpoint: registry is missing '" + name + "'");
    const auto& we = *wit->second;
    const auto& be = *bit->second;
    if (we.extents.size() != 5 || be.extents.size() != 1)
      throw std::runtime_error("checkpoint: unexpected rank for '" + name + "'");
    for (int a = 0; a < 5; ++a)
      if (static_cast<int64_t>(we.extents[static_cast<size_t>(a)]) != p.w.shape[static_cast<size_t>(a)])
        throw std::runtime_error("checkpoint: shape mismatch for '" + name + ".w'");
    if (be.extents[0] != p.b.size())
      throw std::runtime_error("checkpoint: shape mismatch for '" + name + ".b'");
    std::copy(we.data.begin(), we.data.end(), p.w.data.begin());
    std::copy(be.data.begin(), be.data.end(), p.b.begin());
    used += 2;
  });
  if (used != entries.size())
    throw std::runtime_error("checkpoint: " + std::to_string(entries.size() - used) +
                             " tensors do not belong to this architecture");
  return net;
}

}  // namespace hinet
