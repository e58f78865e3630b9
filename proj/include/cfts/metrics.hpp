// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0
//
// FID and LPIPS-style diversity scores computed with a small fixed-weight
// convolutional feature stack. Scores are comparable across runs of this
// project only; they are not comparable to published FID or LPIPS values.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cfts/data.hpp"
#include "cfts/model.hpp"
#include "cfts/tensor.hpp"

namespace cfts {

inline constexpr const char* kExtractorVersion = "toyfeat-v1";
inline constexpr std::uint64_t kExtractorSeed = 0x746f79666561ULL;

/// Per-image activations of every extractor layer, channel-normalized at each
/// spatial position, plus the pooled descriptor used for FID.
struct ImageFeatures {
  std::vector<std::vector<float>> layers;  // [layer][c * h * w], unit norm over c
  std::vector<std::size_t> layer_plane;    // h * w per layer
  std::vector<float> pooled;               // global average pool of raw activations
};

class FeatureExtractor {
 public:
  /// Three 3x3 conv layers (3 -> 16 -> 32 -> 64) with LeakyReLU, 2x average
  /// pooling between them. Grayscale input is replicated to 3 channels.
  static FeatureExtractor from_seed(std::uint64_t seed = kExtractorSeed);
  /// Reads a weight blob written by `save`. Throws FormatError on a layout mismatch.
  static FeatureExtractor load(const std::filesystem::path& blob);
  /// The blob shipped in the asset directory (CFTS_ASSET_DIR env overrides).
  static const FeatureExtractor& shipped();

  void save(const std::filesystem::path& blob) const;
  bool same_weights(const FeatureExtractor& other) const;

  std::size_t feature_dim() const noexcept { return 16 + 32 + 64; }

  std::vector<ImageFeatures> features(const ImageBatch& images) const;
  /// Rows are pooled descriptors, one per image.
  Eigen::MatrixXd pooled(const ImageBatch& images) const;

 private:
  FeatureExtractor() = default;
  ParameterGroup<float> params_{"extractor"};
};

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Sample mean and unbiased covariance. Throws ArgumentError for < 2 rows.
GaussianStats gaussian_stats(const Eigen::MatrixXd& features);

/// Frechet distance; throws ArgumentError on mismatched dimensions.
double fid(const GaussianStats& a, const GaussianStats& b);

/// LPIPS-style distance between precomputed features.
double perceptual_distance(const ImageFeatures& a, const ImageFeatures& b);
double perceptual_distance(const ImageBatch& a, std::size_t ia, const ImageBatch& b, std::size_t ib,
                           const FeatureExtractor& extractor);

/// Symmetric pairwise distance matrix with a zero diagonal.
Eigen::MatrixXd pairwise_distances(const std::vector<ImageFeatures>& feats);

/// Mean distance over unordered pairs within each cluster of size >= 2,
/// averaged over those clusters; 0 when no cluster has two members.
double balanced_pairwise_score(const Eigen::MatrixXd& distances, const std::vector<std::size_t>& cluster);

/// Mean over all unordered pairs. Throws ArgumentError for < 2 items.
double mean_pairwise_score(const Eigen::MatrixXd& distances);

/// Index of the nearest anchor row (Euclidean) for every query row.
std::vector<std::size_t> nearest_anchor(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& anchors);

/// Balanced pairwise LPIPS: images are clustered by their nearest training
/// image in pooled feature space; without anchors all images form one cluster.
/// Throws ArgumentError for N < 2.
double b_lpips(const ImageBatch& images, const FeatureExtractor& extractor,
               const ImageBatch* anchors = nullptr);

struct MetricReport {
  std::string task_id;
  double fid = 0.0;
  double b_lpips = 0.0;
  double mean_pairwise_lpips = 0.0;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  std::string extractor_version = kExtractorVersion;

  std::string to_json() const;
};

/// Scores a generated set against real images. Real features are augmented
/// by horizontal flips when fewer than 50 real images are available.
MetricReport evaluate_images(const std::string& task_id, const ImageBatch& generated, const ImageBatch& real,
                             std::uint64_t seed, const FeatureExtractor& extractor);

/// Generates n_samples images from the active task of `gen` with seeded noise.
MetricReport evaluate_task(const Generator& gen, const TaskDataset& dataset, std::size_t n_samples,
                           std::uint64_t seed, const FeatureExtractor& extractor);

}  // namespace cfts
