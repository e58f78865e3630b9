// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint directories: manifest.json plus one tensor blob per parameter
// group. A blob is a sequence of records, each an 8-byte magic, the rank and
// dimensions as u64 little-endian, then the values as f32 little-endian.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cfts/model.hpp"

namespace cfts {

inline constexpr int kCheckpointFormatVersion = 1;

struct RawTensor {
  std::vector<std::size_t> shape;
  std::vector<float> data;
};

std::vector<std::uint8_t> encode_tensor_blob(const std::vector<RawTensor>& tensors);
/// Throws FormatError on a bad magic, truncation or trailing bytes.
std::vector<RawTensor> decode_tensor_blob(const std::vector<std::uint8_t>& bytes);

enum class CheckpointRole { source, teacher, student };
std::string to_string(CheckpointRole role);
CheckpointRole parse_checkpoint_role(const std::string& s);

struct Checkpoint {
  CheckpointRole role = CheckpointRole::source;
  std::string task_id;  // teacher: the task it was adapted to
  Generator generator{GeneratorConfig{}};
  std::optional<Discriminator> discriminator;
  std::map<std::string, std::uint64_t> seeds;
};

/// SHA-256 over the canonical JSON of the architecture (seeds excluded).
std::string architecture_hash(const GeneratorConfig& g, const std::optional<DiscriminatorConfig>& d);

/// Writes `dir/manifest.json` and the group blobs (see write_output for the
/// overwrite rule).
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir, bool force = false);

/// Throws IoError when the directory or a file is missing, FormatError on a
/// corrupt manifest or blob, ConsistencyError when the stored architecture
/// does not hash to the recorded value or to `expected_hash`.
Checkpoint load_checkpoint(const std::filesystem::path& dir,
                           const std::optional<std::string>& expected_hash = std::nullopt);

/// SHA-256 of manifest.json, which itself records every blob digest.
std::string checkpoint_digest(const std::filesystem::path& dir);

}  // namespace cfts
