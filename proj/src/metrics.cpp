// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0

#include "cfts/metrics.hpp"

#include <cmath>
#include <cstdlib>
#include <map>
#include <nlohmann/json.hpp>
#include <random>

#include "cfts/checkpoint.hpp"
#include "cfts/error.hpp"
#include "cfts/io.hpp"
#include "cfts/kernels.hpp"

#ifndef CFTS_ASSET_DIR
#define CFTS_ASSET_DIR "assets"
#endif

namespace cfts {
namespace fs = std::filesystem;

namespace {

constexpr std::size_t kWidths[] = {3, 16, 32, 64};
constexpr double kSlope = 0.2;
constexpr float kNormEps = 1e-10f;

ImageBatch to_rgb(const ImageBatch& images) {
  const Shape4& s = images.shape();
  if (s.c == 3) return images;
  if (s.c != 1) throw ArgumentError("feature extractor expects 1 or 3 channels");
  ImageBatch out({s.n, 3, s.h, s.w});
  for (std::size_t n = 0; n < s.n; ++n) {
    const auto src = images.sample(n);
    auto dst = out.sample(n);
    for (std::size_t c = 0; c < 3; ++c) std::copy(src.begin(), src.end(), dst.begin() + c * s.plane());
  }
  return out;
}

std::vector<float> normalize_channels(std::span<const float> act, std::size_t channels, std::size_t plane) {
  std::vector<float> out(act.begin(), act.end());
  for (std::size_t p = 0; p < plane; ++p) {
    float ss = 0.0f;
    for (std::size_t c = 0; c < channels; ++c) ss += act[c * plane + p] * act[c * plane + p];
    const float inv = 1.0f / std::sqrt(ss + kNormEps);
    for (std::size_t c = 0; c < channels; ++c) out[c * plane + p] *= inv;
  }
  return out;
}

}  // namespace

FeatureExtractor FeatureExtractor::from_seed(std::uint64_t seed) {
  FeatureExtractor fx;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l < 3; ++l) {
    const std::size_t in = kWidths[l];
    const std::size_t out = kWidths[l + 1];
    auto& w = fx.params_.add("conv" + std::to_string(l) + ".weight", {out, in, 3, 3});
    const double std_dev = std::sqrt(2.0 / static_cast<double>(in * 9));
    for (auto& v : w.value) v = static_cast<float>(normal(rng) * std_dev);
    fx.params_.add("conv" + std::to_string(l) + ".bias", {out});
  }
  fx.params_.set_trainable(false);
  return fx;
}

FeatureExtractor FeatureExtractor::load(const fs::path& blob) {
  FeatureExtractor fx = from_seed(0);
  const auto raw = decode_tensor_blob(read_bytes(blob));
  auto& params = fx.params_.params();
  if (raw.size() != params.size()) throw FormatError("feature extractor blob has the wrong tensor count");
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].shape != params[i].shape) throw FormatError("feature extractor blob has the wrong layout");
    params[i].value = raw[i].data;
  }
  return fx;
}

const FeatureExtractor& FeatureExtractor::shipped() {
  static const FeatureExtractor fx = [] {
    const char* env = std::getenv("CFTS_ASSET_DIR");
    const fs::path dir = env != nullptr && *env != '\0' ? fs::path(env) : fs::path(CFTS_ASSET_DIR);
    const fs::path blob = dir / (std::string(kExtractorVersion) + ".bin");
    if (!fs::exists(blob)) throw IoError("feature extractor weights not found at '" + blob.string() + "'");
    return load(blob);
  }();
  return fx;
}

void FeatureExtractor::save(const fs::path& blob) const {
  std::vector<RawTensor> raw;
  for (const auto& p : params_.params()) raw.push_back({p.shape, p.value});
  write_output(blob, encode_tensor_blob(raw), true);
}

bool FeatureExtractor::same_weights(const FeatureExtractor& other) const {
  return params_.same_values(other.params_);
}

std::vector<ImageFeatures> FeatureExtractor::features(const ImageBatch& images) const {
  const std::size_t n = images.shape().n;
  std::vector<ImageFeatures> out(n);
  Tensor<float> x = to_rgb(images);
  for (std::size_t l = 0; l < 3; ++l) {
    if (l > 0) x = nn::avgpool2x_forward(x);
    const auto& w = params_.params()[2 * l];
    const auto& b = params_.params()[2 * l + 1];
    nn::ConvGeometry g;
    g.in_channels = kWidths[l];
    g.out_channels = kWidths[l + 1];
    g.in_h = x.shape().h;
    g.in_w = x.shape().w;
    x = nn::conv2d_forward<float, float>(g, x, std::span<const float>(w.value), std::span<const float>(b.value));
    nn::leaky_relu_inplace(x, kSlope);
    const std::size_t c = x.shape().c;
    const std::size_t plane = x.shape().plane();
    for (std::size_t i = 0; i < n; ++i) {
      const auto act = x.sample(i);
      out[i].layers.push_back(normalize_channels(act, c, plane));
      out[i].layer_plane.push_back(plane);
      for (std::size_t ch = 0; ch < c; ++ch) {
        double sum = 0.0;
        for (std::size_t p = 0; p < plane; ++p) sum += act[ch * plane + p];
        out[i].pooled.push_back(static_cast<float>(sum / static_cast<double>(plane)));
      }
    }
  }
  return out;
}

Eigen::MatrixXd FeatureExtractor::pooled(const ImageBatch& images) const {
  const auto feats = features(images);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(feats.size()), static_cast<Eigen::Index>(feature_dim()));
  for (std::size_t i = 0; i < feats.size(); ++i) {
    for (std::size_t j = 0; j < feature_dim(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = feats[i].pooled[j];
  }
  return m;
}

GaussianStats gaussian_stats(const Eigen::MatrixXd& features) {
  if (features.rows() < 2) throw ArgumentError("gaussian_stats needs at least 2 rows");
  GaussianStats s;
  s.mean = features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.rowwise() - s.mean.transpose();
  s.cov = (centered.transpose() * centered) / static_cast<double>(features.rows() - 1);
  return s;
}

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double fid(const GaussianStats& a, const GaussianStats& b) {
  if (a.mean.size() != b.mean.size() || a.cov.rows() != b.cov.rows() || a.cov.rows() != a.mean.size()) {
    throw ArgumentError("fid: mismatched feature dimensions");
  }
  // tr((Sa Sb)^1/2) = tr((Sa^1/2 Sb Sa^1/2)^1/2), whose argument is symmetric PSD.
  const Eigen::MatrixXd sa = psd_sqrt(a.cov);
  const Eigen::MatrixXd inner = sa * b.cov * sa;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double tr_sqrt = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double value = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * tr_sqrt;
  return std::max(value, 0.0);
}

double perceptual_distance(const ImageFeatures& a, const ImageFeatures& b) {
  if (a.layers.size() != b.layers.size()) throw ArgumentError("perceptual_distance: mismatched features");
  double total = 0.0;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const auto& x = a.layers[l];
    const auto& y = b.layers[l];
    if (x.size() != y.size()) throw ArgumentError("perceptual_distance: mismatched features");
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
      ss += d * d;
    }
    total += ss / static_cast<double>(a.layer_plane[l]);
  }
  return total;
}

double perceptual_distance(const ImageBatch& a, std::size_t ia, const ImageBatch& b, std::size_t ib,
                           const FeatureExtractor& extractor) {
  const auto fa = extractor.features(a.slice(ia, ia + 1));
  const auto fb = extractor.features(b.slice(ib, ib + 1));
  return perceptual_distance(fa[0], fb[0]);
}

Eigen::MatrixXd pairwise_distances(const std::vector<ImageFeatures>& feats) {
  const auto n = static_cast<Eigen::Index>(feats.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = perceptual_distance(feats[static_cast<std::size_t>(i)], feats[static_cast<std::size_t>(j)]);
    }
  }
  return d;
}

double balanced_pairwise_score(const Eigen::MatrixXd& distances, const std::vector<std::size_t>& cluster) {
  if (static_cast<Eigen::Index>(cluster.size()) != distances.rows() || distances.rows() != distances.cols()) {
    throw ArgumentError("balanced_pairwise_score: cluster labels do not match the distance matrix");
  }
  std::map<std::size_t, std::vector<Eigen::Index>> members;
  for (std::size_t i = 0; i < cluster.size(); ++i) members[cluster[i]].push_back(static_cast<Eigen::Index>(i));
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& [label, idx] : members) {
    if (idx.size() < 2) continue;
    double s = 0.0;
    for (std::size_t a = 0; a < idx.size(); ++a) {
      for (std::size_t b = a + 1; b < idx.size(); ++b) s += distances(idx[a], idx[b]);
    }
    sum += s / static_cast<double>(idx.size() * (idx.size() - 1) / 2);
    ++used;
  }
  return used == 0 ? 0.0 : sum / static_cast<double>(used);
}

double mean_pairwise_score(const Eigen::MatrixXd& distances) {
  const Eigen::Index n = distances.rows();
  if (n < 2) throw ArgumentError("mean_pairwise_score needs at least 2 items");
  return balanced_pairwise_score(distances, std::vector<std::size_t>(static_cast<std::size_t>(n), 0));
}

std::vector<std::size_t> nearest_anchor(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& anchors) {
  if (anchors.rows() == 0 || anchors.cols() != queries.cols()) throw ArgumentError("nearest_anchor: bad anchors");
  std::vector<std::size_t> out(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    Eigen::Index best = 0;
    (anchors.rowwise() - queries.row(i)).rowwise().squaredNorm().minCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
  }
  return out;
}

double b_lpips(const ImageBatch& images, const FeatureExtractor& extractor, const ImageBatch* anchors) {
  if (images.shape().n < 2) throw ArgumentError("b_lpips needs at least 2 images");
  const auto feats = extractor.features(images);
  std::vector<std::size_t> cluster(feats.size(), 0);
  if (anchors != nullptr) cluster = nearest_anchor(extractor.pooled(images), extractor.pooled(*anchors));
  return balanced_pairwise_score(pairwise_distances(feats), cluster);
}

std::string MetricReport::to_json() const {
  const nlohmann::json j = {{"task_id", task_id},
                            {"fid", fid},
                            {"b_lpips", b_lpips},
                            {"mean_pairwise_lpips", mean_pairwise_lpips},
                            {"n_samples", n_samples},
                            {"seed", seed},
                            {"extractor_version", extractor_version}};
  return j.dump(2) + "\n";
}

MetricReport evaluate_images(const std::string& task_id, const ImageBatch& generated, const ImageBatch& real,
                             std::uint64_t seed, const FeatureExtractor& extractor) {
  if (generated.shape().n < 2 || real.shape().n < 1) throw ArgumentError("evaluate_images: too few images");
  ImageBatch reference = real;
  if (real.shape().n < 50) reference = concat_batch(std::vector<ImageBatch>{real, horizontal_flip(real)});
  const auto gen_feats = extractor.features(generated);
  Eigen::MatrixXd gen_pooled(static_cast<Eigen::Index>(gen_feats.size()), static_cast<Eigen::Index>(extractor.feature_dim()));
  for (std::size_t i = 0; i < gen_feats.size(); ++i) {
    for (std::size_t j = 0; j < extractor.feature_dim(); ++j) {
      gen_pooled(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = gen_feats[i].pooled[j];
    }
  }
  const Eigen::MatrixXd distances = pairwise_distances(gen_feats);

  MetricReport r;
  r.task_id = task_id;
  r.n_samples = generated.shape().n;
  r.seed = seed;
  r.fid = fid(gaussian_stats(gen_pooled), gaussian_stats(extractor.pooled(reference)));
  r.b_lpips = balanced_pairwise_score(distances, nearest_anchor(gen_pooled, extractor.pooled(real)));
  r.mean_pairwise_lpips = mean_pairwise_score(distances);
  return r;
}

MetricReport evaluate_task(const Generator& gen, const TaskDataset& dataset, std::size_t n_samples,
                           std::uint64_t seed, const FeatureExtractor& extractor) {
  const NoiseBatch z = sample_noise(n_samples, gen.config().latent_dim, seed);
  return evaluate_images(dataset.task_id, gen.generate(z), dataset.images, seed, extractor);
}

}  // namespace cfts
