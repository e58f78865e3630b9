// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0
//
// Image ingestion, task registry, few-shot subsetting and noise sampling.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cfts/model.hpp"
#include "cfts/tensor.hpp"

namespace cfts {

/// Images of one task, normalized to [-1, 1], plus their source file names.
struct TaskDataset {
  std::string task_id;
  std::size_t resolution = 0;
  std::size_t channels = 0;
  ImageBatch images;
  std::vector<std::string> files;

  std::size_t size() const noexcept { return images.shape().n; }
};

struct TaskSpec {
  std::string task_id;
  std::filesystem::path image_dir;
  std::size_t n_shots = 10;
  std::size_t position = 0;
};

/// Tasks in insertion order with unique ids.
class TaskRegistry {
 public:
  /// Throws ConflictError on a duplicate id, ArgumentError on n_shots == 0.
  void add(TaskSpec spec);
  const TaskSpec& find(std::string_view task_id) const;
  bool contains(std::string_view task_id) const;
  const std::vector<TaskSpec>& tasks() const noexcept { return tasks_; }
  std::size_t size() const noexcept { return tasks_.size(); }

 private:
  std::vector<TaskSpec> tasks_;
};

/// Reads `{"schema_version": 1, "tasks": [{"task_id", "path", "n_shots",
/// "position"?}]}`. Relative paths resolve against the manifest's directory;
/// tasks are ordered by `position` when present, else by array order.
TaskRegistry load_task_manifest(const std::filesystem::path& manifest);
void save_task_manifest(const TaskRegistry& registry, const std::filesystem::path& manifest);

/// Decodes every PNG/JPEG in `dir` (lexicographic order), center-crops to a
/// square, resizes to `resolution` and normalizes to [-1, 1]. Throws
/// DataError naming the offending file on decode failure or when files mix
/// channel layouts, and on an empty directory.
TaskDataset load_task(const std::filesystem::path& dir, const std::string& task_id,
                      std::size_t resolution, std::size_t channels = 1);

/// Seeded sample of n images without replacement, returned in original order.
TaskDataset few_shot_subset(const TaskDataset& dataset, std::size_t n, std::uint64_t seed);

/// i.i.d. N(0, 1) latents of shape (n, latent_dim, 1, 1).
NoiseBatch sample_noise(std::size_t n, std::size_t latent_dim, std::uint64_t seed);

/// Mirrors every image left-right.
ImageBatch horizontal_flip(const ImageBatch& images);

/// Deterministic child seed for a named sub-stream of `base`.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

/// [-1, 1] -> 8-bit, rounding to nearest.
std::uint8_t to_u8(float v) noexcept;
/// 8-bit -> [-1, 1].
float from_u8(std::uint8_t v) noexcept;

/// PNG bytes of sample i (grayscale or RGB).
std::vector<std::uint8_t> encode_png(const ImageBatch& images, std::size_t index);
/// Tiles the batch into a grid with `columns` columns.
std::vector<std::uint8_t> encode_grid_png(const ImageBatch& images, std::size_t columns);

}  // namespace cfts
