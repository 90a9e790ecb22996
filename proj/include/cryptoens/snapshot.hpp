#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "cryptoens/network.hpp"

namespace cryptoens::nn {

struct SnapshotMeta {
  std::string config_hash;
  std::int64_t window = -1;
  std::int64_t period = -1;  // -1 for the final-epoch snapshot
  std::int64_t epoch = -1;
  double smoothed_return = 0.0;
};

struct Snapshot {
  NetworkWeights weights;
  SnapshotMeta meta;
};

/// Binary layout: "CENSNAP1", u32 header length, JSON header (shape, meta, array names and
/// sizes), then raw little-endian doubles for params, BN running mean and BN running var.
std::string encode_snapshot(const Snapshot& snap);
Snapshot decode_snapshot(const std::string& bytes);

void save_snapshot(const std::filesystem::path& path, const Snapshot& snap);
Snapshot load_snapshot(const std::filesystem::path& path);

/// FNV-1a of the encoded bytes.
std::string snapshot_hash(const Snapshot& snap);

}  // namespace cryptoens::nn
