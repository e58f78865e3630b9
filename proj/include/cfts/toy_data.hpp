// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0
//
// Procedural grayscale shape corpus used for the toy source domain and the
// few-shot task sequence.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cfts/tensor.hpp"

namespace cfts {

enum class ToyShape { ellipse, ring, bar, cross, square, triangle, arc, dots, frame, chevron };

const std::vector<ToyShape>& source_shapes();
const std::vector<ToyShape>& task_shapes();
std::string to_string(ToyShape shape);
ToyShape parse_toy_shape(const std::string& name);

/// `count` random instances of one shape, (count, 1, res, res) in [-1, 1].
ImageBatch render_toy_shape(ToyShape shape, std::size_t count, std::size_t resolution, std::uint64_t seed);

/// Source mixture: the source shapes in round-robin order.
ImageBatch render_source_corpus(std::size_t count, std::size_t resolution, std::uint64_t seed);

struct ToyCorpusOptions {
  std::size_t source_count = 5000;
  std::size_t task_images = 10;
  std::size_t resolution = 32;
  std::uint64_t seed = 0;
};

/// Writes `source/` PNGs, one `tasks/<shape>/` directory per task shape and
/// a `tasks.json` manifest. Returns the manifest path.
std::filesystem::path write_toy_corpus(const std::filesystem::path& out_dir, const ToyCorpusOptions& options);

}  // namespace cfts
