#include "hinet/volume.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "hinet/rng.hpp"

namespace hinet {

namespace fs = std::filesystem;
using nlohmann::json;

LabelVolume region_binarize(const LabelVolume& labels, Region region) {
  LabelVolume mask(labels.extents[0], labels.extents[1], labels.extents[2]);
  for (size_t i = 0; i < labels.values.size(); ++i) {
    const uint8_t v = labels.values[i];
    if (!valid_label(v))
      throw std::invalid_argument("region_binarize: unknown label value " + std::to_string(v));
    mask.values[i] = region_contains(region, v) ? 1 : 0;
  }
  return mask;
}

LabelVolume argmax_labels(const Tensor5<float>& probs) {
  if (probs.n() != 1 || probs.c() != 4)
    throw std::invalid_argument("argmax_labels: expected shape (1,4,z,y,x), got " +
                                shape_str(probs.shape));
  LabelVolume out(probs.z(), probs.y(), probs.x());
  const int64_t plane = probs.spatial();
  for (int64_t j = 0; j < plane; ++j) {
    int best = 0;
    float best_v = probs.data[static_cast<size_t>(j)];
    for (int c = 1; c < 4; ++c) {
      const float v = probs.data[static_cast<size_t>(c * plane + j)];
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    out.values[static_cast<size_t>(j)] = kClassCodes[static_cast<size_t>(best)];
  }
  return out;
}

VolumeSample make_phantom(uint64_t seed, int64_t extent) {
  if (extent < 16)
    throw std::invalid_argument("make_phantom: extent must be >= 16, got " +
                                std::to_string(extent));
  SplitMix64 rng(seed);
  const double e = static_cast<double>(extent);

  double cz = e * (0.5 + rng.next_uniform(-0.08, 0.08));
  double cy = e * (0.5 + rng.next_uniform(-0.08, 0.08));
  double cx = e * (0.5 + rng.next_uniform(-0.08, 0.08));
  double r_ed = e * rng.next_uniform(0.28, 0.40);
  double r_ncr = r_ed * rng.next_uniform(0.55, 0.72);
  double r_et = r_ncr * rng.next_uniform(0.50, 0.75);
  // keep every shell at least a voxel thick so no region is empty
  r_et = std::max(r_et, 1.75);
  r_ncr = std::max(r_ncr, r_et + 1.0);
  r_ed = std::max(r_ed, r_ncr + 1.0);

  VolumeSample sample;
  sample.labels = LabelVolume(extent, extent, extent);
  for (int64_t z = 0; z < extent; ++z)
    for (int64_t y = 0; y < extent; ++y)
      for (int64_t x = 0; x < extent; ++x) {
        const double dz = static_cast<double>(z) - cz;
        const double dy = static_cast<double>(y) - cy;
        const double dx = static_cast<double>(x) - cx;
        const double d = std::sqrt(dz * dz + dy * dy + dx * dx);
        uint8_t label = 0;
        if (d <= r_et)
          label = 4;
        else if (d <= r_ncr)
          label = 1;
        else if (d <= r_ed)
          label = 2;
        sample.labels.at(z, y, x) = label;
      }

  // per-channel base intensity by tissue class, roughly T1/T1c/T2/FLAIR roles;
  // signatures are pairwise well separated relative to the noise
  static const double base[4][4] = {
      // bg    ncr   edema enhancing
      {0.10, 0.70, 0.30, 0.90},  // T1
      {0.15, 0.30, 0.55, 0.95},  // T1c
      {0.20, 0.85, 0.95, 0.35},  // T2
      {0.10, 0.60, 0.95, 0.55},  // FLAIR
  };
  const double noise_sigma = 0.05;
  sample.image = Tensor5<float>(1, 4, extent, extent, extent);
  const int64_t plane = sample.labels.voxels();
  for (int c = 0; c < 4; ++c) {
    float* out = sample.image.data.data() + static_cast<size_t>(c * plane);
    for (int64_t j = 0; j < plane; ++j) {
      const int cls = label_to_class(sample.labels.values[static_cast<size_t>(j)]);
      out[j] = static_cast<float>(base[c][cls] + noise_sigma * rng.next_gaussian_like());
    }
  }
  return sample;
}

AugmentSetting compose(const AugmentSetting& second, const AugmentSetting& first) {
  AugmentSetting out;
  for (int a = 0; a < 3; ++a) {
    out.perm[a] = first.perm[static_cast<size_t>(second.perm[a])];
    out.flip[a] = second.flip[a] != first.flip[static_cast<size_t>(second.perm[a])];
  }
  return out;
}

namespace {

// 90-degree rotation in the plane of axes (a, b): transpose the two axes,
// then reverse axis a.
AugmentSetting rot90(int a, int b) {
  AugmentSetting t;
  t.perm[a] = b;
  t.perm[b] = a;
  AugmentSetting f;
  f.flip[a] = true;
  return compose(f, t);
}

}  // namespace

AugmentSetting random_augment_setting(uint64_t seed) {
  SplitMix64 rng(seed);
  AugmentSetting mirrors;
  for (int a = 0; a < 3; ++a) mirrors.flip[a] = rng.next_bool();
  static const int planes[3][2] = {{0, 1}, {0, 2}, {1, 2}};
  const auto& pl = planes[rng.next_below(3)];
  const int quarter_turns = static_cast<int>(rng.next_below(4));
  AugmentSetting s = mirrors;
  const AugmentSetting r = rot90(pl[0], pl[1]);
  for (int k = 0; k < quarter_turns; ++k) s = compose(r, s);
  return s;
}

std::vector<AugmentSetting> all_augment_settings() {
  static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                  {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  std::vector<AugmentSetting> out;
  for (const auto& p : perms)
    for (int mask = 0; mask < 8; ++mask) {
      AugmentSetting s;
      s.perm = {p[0], p[1], p[2]};
      for (int a = 0; a < 3; ++a) s.flip[a] = (mask >> a) & 1;
      out.push_back(s);
    }
  return out;
}

namespace {

template <typename Get, typename Set>
void apply_mapping(const std::array<int64_t, 3>& in_ext, const AugmentSetting& s, Get&& get,
                   Set&& set) {
  const std::array<int64_t, 3> out_ext = {in_ext[static_cast<size_t>(s.perm[0])],
                                          in_ext[static_cast<size_t>(s.perm[1])],
                                          in_ext[static_cast<size_t>(s.perm[2])]};
  std::array<int64_t, 3> q{};
  for (q[0] = 0; q[0] < out_ext[0]; ++q[0])
    for (q[1] = 0; q[1] < out_ext[1]; ++q[1])
      for (q[2] = 0; q[2] < out_ext[2]; ++q[2]) {
        std::array<int64_t, 3> src{};
        for (int a = 0; a < 3; ++a) {
          const int ia = s.perm[a];
          src[static_cast<size_t>(ia)] =
              s.flip[a] ? in_ext[static_cast<size_t>(ia)] - 1 - q[static_cast<size_t>(a)]
                        : q[static_cast<size_t>(a)];
        }
        set(q[0], q[1], q[2], get(src[0], src[1], src[2]));
      }
}

}  // namespace

LabelVolume apply_augment(const LabelVolume& labels, const AugmentSetting& s) {
  LabelVolume out(labels.extents[static_cast<size_t>(s.perm[0])],
                  labels.extents[static_cast<size_t>(s.perm[1])],
                  labels.extents[static_cast<size_t>(s.perm[2])]);
  apply_mapping(
      labels.extents, s, [&](int64_t z, int64_t y, int64_t x) { return labels.at(z, y, x); },
      [&](int64_t z, int64_t y, int64_t x, uint8_t v) { out.at(z, y, x) = v; });
  return out;
}

VolumeSample apply_augment(const VolumeSample& sample, const AugmentSetting& s) {
  VolumeSample out;
  out.labels = apply_augment(sample.labels, s);
  const auto& img = sample.image;
  out.image = Tensor5<float>(img.n(), img.c(), out.labels.extents[0], out.labels.extents[1],
                             out.labels.extents[2]);
  for (int64_t n = 0; n < img.n(); ++n)
    for (int64_t c = 0; c < img.c(); ++c)
      apply_mapping(
          sample.labels.extents, s,
          [&](int64_t z, int64_t y, int64_t x) { return img.at(n, c, z, y, x); },
          [&](int64_t z, int64_t y, int64_t x, float v) { out.image.at(n, c, z, y, x) = v; });
  return out;
}

VolumeSample augment(const VolumeSample& sample, uint64_t seed) {
  return apply_augment(sample, random_augment_setting(seed));
}

namespace {

uint32_t payload_crc(const std::vector<float>& img, const std::vector<uint8_t>& lbl) {
  uLong crc = crc32(0L, Z_NULL, 0);
  if (!img.empty())
    crc = crc32(crc, reinterpret_cast<const Bytef*>(img.data()),
                static_cast<uInt>(img.size() * sizeof(float)));
  if (!lbl.empty()) crc = crc32(crc, lbl.data(), static_cast<uInt>(lbl.size()));
  return static_cast<uint32_t>(crc);
}

void write_bytes(const fs::path& path, const void* data, size_t bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("hvol: cannot open for writing: " + path.string());
  f.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!f) throw std::runtime_error("hvol: write failed: " + path.string());
}

std::vector<char> read_bytes(const fs::path& path, size_t expected) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw std::runtime_error("hvol: cannot open payload file: " + path.string());
  const auto size = static_cast<size_t>(f.tellg());
  if (size != expected)
    throw std::runtime_error("hvol: truncated payload " + path.string() + ": expected " +
                             std::to_string(expected) + " bytes, found " + std::to_string(size));
  f.seekg(0);
  std::vector<char> buf(size);
  f.read(buf.data(), static_cast<std::streamsize>(size));
  if (!f) throw std::runtime_error("hvol: read failed: " + path.string());
  return buf;
}

}  // namespace

void write_volume(const std::string& path, const VolumeSample& sample) {
  const auto& img = sample.image;
  const auto& lbl = sample.labels;
  if (img.n() != 1)
    throw std::invalid_argument("write_volume: image batch extent must be 1, got " +
                                shape_str(img.shape));
  if (img.c() > 0 &&
      (img.z() != lbl.extents[0] || img.y() != lbl.extents[1] || img.x() != lbl.extents[2]))
    throw std::invalid_argument("write_volume: image and label extents differ");
  for (uint8_t v : lbl.values)
    if (!valid_label(v))
      throw std::invalid_argument("write_volume: unknown label value " + std::to_string(v));

  const fs::path header_path(path);
  const std::string data_name = header_path.filename().string() + ".img";
  const std::string label_name = header_path.filename().string() + ".lbl";

  json header;
  header["magic"] = "HVOL1";
  header["extents"] = {lbl.extents[0], lbl.extents[1], lbl.extents[2]};
  header["modalities"] = img.c();
  header["dtype"] = "f32le";
  header["label_dtype"] = "u8";
  header["data_file"] = data_name;
  header["label_file"] = label_name;
  header["crc32"] = payload_crc(img.data, lbl.values);

  const fs::path dir = header_path.parent_path();
  write_bytes(dir / data_name, img.data.data(), img.data.size() * sizeof(float));
  write_bytes(dir / label_name, lbl.values.data(), lbl.values.size());

  std::ofstream f(header_path, std::ios::trunc);
  if (!f) throw std::runtime_error("hvol: cannot open for writing: " + path);
  f << header.dump(2) << "\n";
  if (!f) throw std::runtime_error("hvol: write failed: " + path);
}

VolumeSample read_volume(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("hvol: cannot open header: " + path);
  json header;
  try {
    f >> header;
  } catch (const json::exception& e) {
    throw std::runtime_error("hvol: malformed header " + path + ": " + e.what());
  }
  for (const char* key :
       {"magic", "extents", "modalities", "dtype", "label_dtype", "data_file", "label_file",
        "crc32"})
    if (!header.contains(key))
      throw std::runtime_error(std::string("hvol: malformed header ") + path + ": missing key '" +
                               key + "'");
  if (header["magic"] != "HVOL1")
    throw std::runtime_error("hvol: malformed header " + path + ": bad magic '" +
                             header["magic"].dump() + "'");
  if (header["dtype"] != "f32le" || header["label_dtype"] != "u8")
    throw std::runtime_error("hvol: malformed header " + path + ": unsupported dtype");
  const auto extents = header["extents"].get<std::vector<int64_t>>();
  if (extents.size() != 3 || extents[0] < 1 || extents[1] < 1 || extents[2] < 1)
    throw std::runtime_error("hvol: malformed header " + path + ": bad extents");
  const int64_t modalities = header["modalities"].get<int64_t>();
  if (modalities < 0)
    throw std::runtime_error("hvol: malformed header " + path + ": bad modalities");

  const fs::path dir = fs::path(path).parent_path();
  const int64_t voxels = extents[0] * extents[1] * extents[2];
  const auto img_bytes =
      read_bytes(dir / header["data_file"].get<std::string>(),
                 static_cast<size_t>(modalities * voxels) * sizeof(float));
  const auto lbl_bytes =
      read_bytes(dir / header["label_file"].get<std::string>(), static_cast<size_t>(voxels));

  VolumeSample sample;
  sample.image = Tensor5<float>(1, modalities, extents[0], extents[1], extents[2]);
  std::memcpy(sample.image.data.data(), img_bytes.data(), img_bytes.size());
  sample.labels = LabelVolume(extents[0], extents[1], extents[2]);
  std::memcpy(sample.labels.values.data(), lbl_bytes.data(), lbl_bytes.size());

  const uint32_t crc = payload_crc(sample.image.data, sample.labels.values);
  if (crc != header["crc32"].get<uint32_t>())
    throw std::runtime_error("hvol: checksum mismatch in " + path + ": header says " +
                             std::to_string(header["crc32"].get<uint32_t>()) + ", payload is " +
                             std::to_string(crc));
  for (uint8_t v : sample.labels.values)
    if (!valid_label(v))
      throw std::runtime_error("hvol: unknown label value " + std::to_string(v) + " in " + path);
  return sample;
}

}  // namespace hinet
