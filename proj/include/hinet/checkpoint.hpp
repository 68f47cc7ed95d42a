#pragma once

#include <string>
#include <vector>

#include "hinet/network.hpp"

namespace hinet {

// Checkpoint container: magic "HINT", version u32 = 1, little-endian
// throughout; then tensor count u32 and per tensor: name length u16 + UTF-8
// name, dtype u8 (0 = f32), rank u8, extents as u32, raw payload. Every
// ConvWeights contributes two tensors, "<name>.w" (rank 5) and "<name>.b"
// (rank 1). Round-trips are bitwise exact.

struct CheckpointEntry {
  std::string name;
  std::vector<uint32_t> extents;
  std::vector<float> data;
};

void save_checkpoint(const std::string& path, Network<float>& net);

std::vector<CheckpointEntry> read_checkpoint_entries(const std::string& path);

// Reconstructs the architecture a checkpoint's registry describes (widths,
// levels, repetitions, variant, class count) from its names and shapes.
NetworkConfig infer_config(const std::vector<CheckpointEntry>& entries);

// Rebuild-and-fill: every registry tensor must be present with its exact shape.
Network<float> load_checkpoint(const std::string& path);

}  // namespace hinet
