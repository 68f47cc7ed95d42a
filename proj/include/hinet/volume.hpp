#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hinet/tensor.hpp"

namespace hinet {

// Label codes follow the BRATS convention: 0 background, 1 necrotic core,
// 2 edema, 4 enhancing tumor.
constexpr std::array<uint8_t, 4> kClassCodes = {0, 1, 2, 4};

inline bool valid_label(uint8_t v) { return v == 0 || v == 1 || v == 2 || v == 4; }

inline int label_to_class(uint8_t v) {
  switch (v) {
    case 0: return 0;
    case 1: return 1;
    case 2: return 2;
    case 4: return 3;
    default:
      throw std::invalid_argument("unknown label value " + std::to_string(v) +
                                  "; expected one of {0,1,2,4}");
  }
}

struct LabelVolume {
  std::array<int64_t, 3> extents{0, 0, 0};  // (z, y, x)
  std::vector<uint8_t> values;              // row-major, x fastest

  LabelVolume() = default;
  LabelVolume(int64_t z, int64_t y, int64_t x)
      : extents{z, y, x}, values(static_cast<size_t>(z * y * x), 0) {}

  int64_t voxels() const { return extents[0] * extents[1] * extents[2]; }
  uint8_t& at(int64_t z, int64_t y, int64_t x) {
    return values[static_cast<size_t>((z * extents[1] + y) * extents[2] + x)];
  }
  uint8_t at(int64_t z, int64_t y, int64_t x) const {
    return values[static_cast<size_t>((z * extents[1] + y) * extents[2] + x)];
  }
  bool operator==(const LabelVolume&) const = default;
};

// Multi-modality intensity volume paired with its label volume.
struct VolumeSample {
  Tensor5<float> image;  // (1, modalities, z, y, x)
  LabelVolume labels;
};

// Nested evaluation regions: ET = {4} subset of TC = {1,4} subset of WT = {1,2,4}.
enum class Region { WT, TC, ET };

constexpr std::array<Region, 3> kAllRegions = {Region::WT, Region::TC, Region::ET};

inline const char* region_name(Region r) {
  switch (r) {
    case Region::WT: return "WT";
    case Region::TC: return "TC";
    default: return "ET";
  }
}

inline bool region_contains(Region r, uint8_t label) {
  switch (r) {
    case Region::WT: return label == 1 || label == 2 || label == 4;
    case Region::TC: return label == 1 || label == 4;
    default: return label == 4;
  }
}

// 0/1 mask of the region's label set. Unknown label values are rejected.
LabelVolume region_binarize(const LabelVolume& labels, Region region);

// One-hot encoding over the fixed class order [0, 1, 2, 4], shape (1,4,z,y,x).
template <typename T>
Tensor5<T> one_hot(const LabelVolume& labels) {
  Tensor5<T> out(1, 4, labels.extents[0], labels.extents[1], labels.extents[2]);
  const int64_t plane = labels.voxels();
  for (int64_t j = 0; j < plane; ++j) {
    const int cls = label_to_class(labels.values[static_cast<size_t>(j)]);
    out.data[static_cast<size_t>(cls * plane + j)] = T(1);
  }
  return out;
}

// Argmax over class channels mapped back to label codes.
LabelVolume argmax_labels(const Tensor5<float>& probs);

// Synthetic phantom: three concentric spheres (edema shell -> label 2, core
// -> 1, enhancing center -> 4) with four noisy intensity channels whose
// contrasts differ per tissue. Deterministic per seed.
VolumeSample make_phantom(uint64_t seed, int64_t extent);

// One augmentation setting: an axis permutation plus per-axis mirrorings.
// Output axis a reads input axis perm[a], reversed when flip[a] is set. The
// sampled settings come from per-axis mirrorings (p=0.5 each) composed with a
// 90-degree rotation in a random axis-aligned plane; the family is closed
// under composition.
struct AugmentSetting {
  std::array<int, 3> perm{0, 1, 2};
  std::array<bool, 3> flip{false, false, false};

  bool operator==(const AugmentSetting&) const = default;
};

AugmentSetting compose(const AugmentSetting& second, const AugmentSetting& first);
AugmentSetting random_augment_setting(uint64_t seed);
std::vector<AugmentSetting> all_augment_settings();

LabelVolume apply_augment(const LabelVolume& labels, const AugmentSetting& s);
VolumeSample apply_augment(const VolumeSample& sample, const AugmentSetting& s);
VolumeSample augment(const VolumeSample& sample, uint64_t seed);

// .hvol container: a JSON header next to raw little-endian payload files,
// with a crc32 over image bytes followed by label bytes.
void write_volume(const std::string& path, const VolumeSample& sample);
VolumeSample read_volume(const std::string& path);

}  // namespace hinet
