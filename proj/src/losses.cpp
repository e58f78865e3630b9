// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0

#include "cfts/losses.hpp"

#include <cmath>
#include <cstdio>

#include "cfts/error.hpp"

namespace cfts {
namespace {

template <typename T>
T softplus(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename T>
T sigmoid(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
void require_finite(std::span<const T> xs, const char* what) {
  for (T x : xs) {
    if (!std::isfinite(x)) throw NumericError(std::string(what) + " contains non-finite values");
  }
}

// Per-sample norms sqrt(|x|^2 + eps^2) and the cosine matrix.
template <typename T>
struct CosineTable {
  std::size_t n = 0;
  std::vector<T> norms;
  std::vector<T> cos;  // n x n, symmetric
};

template <typename T>
CosineTable<T> cosine_table(const Tensor<T>& images) {
  const std::size_t n = images.shape().n;
  const std::size_t d = images.shape().sample_size();
  CosineTable<T> t;
  t.n = n;
  t.norms.resize(n);
  t.cos.assign(n * n, T(0));
  std::vector<T> dots(n * n, T(0));
  for (std::size_t i = 0; i < n; ++i) {
    const T* xi = images.sample(i).data();
    for (std::size_t j = i; j < n; ++j) {
      const T* xj = images.sample(j).data();
      T acc = 0;
      for (std::size_t k = 0; k < d; ++k) acc += xi[k] * xj[k];
      dots[i * n + j] = dots[j * n + i] = acc;
    }
  }
  const T eps2 = static_cast<T>(kCosineEps * kCosineEps);
  for (std::size_t i = 0; i < n; ++i) t.norms[i] = std::sqrt(dots[i * n + i] + eps2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) t.cos[i * n + j] = dots[i * n + j] / (t.norms[i] * t.norms[j]);
  }
  return t;
}

template <typename T>
SimilarityDistribution<T> softmax_rows(const CosineTable<T>& t) {
  const std::size_t n = t.n;
  SimilarityDistribution<T> out;
  out.rows = n;
  out.cols = n - 1;
  out.values.resize(n * (n - 1));
  for (std::size_t i = 0; i < n; ++i) {
    T max_v = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) max_v = std::max(max_v, t.cos[i * n + j]);
    }
    T sum = 0;
    std::size_t col = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const T e = std::exp(t.cos[i * n + j] - max_v);
      out.values[i * (n - 1) + col++] = e;
      sum += e;
    }
    for (std::size_t c = 0; c < n - 1; ++c) out.values[i * (n - 1) + c] /= sum;
  }
  return out;
}

// Column of pair (i, j) within row i.
constexpr std::size_t column_of(std::size_t i, std::size_t j) { return j < i ? j : j - 1; }

}  // namespace

void LossWeights::validate() const {
  for (double v : {w_t, w_s, alpha, r1_gamma}) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("loss weights must be finite and >= 0");
  }
}

template <typename T>
void SimilarityDistribution<T>::validate(double tol) const {
  if (values.size() != rows * cols || cols == 0) throw ArgumentError("malformed similarity rows");
  for (std::size_t r = 0; r < rows; ++r) {
    T sum = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      const T v = at(r, c);
      if (!(v > T(0)) || !(v <= T(1))) throw ArgumentError("similarity entry outside (0, 1]");
      sum += v;
    }
    if (std::abs(static_cast<double>(sum) - 1.0) > tol) {
      throw ArgumentError("similarity row " + std::to_string(r) + " does not sum to 1");
    }
  }
}

template <typename T>
SimilarityDistribution<T> similarity_distribution(const Tensor<T>& images) {
  if (images.shape().n < 2) throw ArgumentError("similarity_distribution needs at least 2 samples");
  return softmax_rows(cosine_table(images));
}

template <typename T>
T cdc_loss(const SimilarityDistribution<T>& target, const SimilarityDistribution<T>& source) {
  if (target.rows != source.rows || target.cols != source.cols ||
      target.values.size() != source.values.size() || target.rows == 0) {
    throw ArgumentError("cdc_loss: distribution shapes differ");
  }
  T total = 0;
  for (std::size_t i = 0; i < target.values.size(); ++i) {
    const T p = target.values[i];
    total += p * (std::log(p) - std::log(source.values[i]));
  }
  return total / static_cast<T>(target.rows);
}

template <typename T>
TensorLoss<T> cdc_loss_and_grad(const Tensor<T>& target_images,
                                const SimilarityDistribution<T>& source) {
  const std::size_t n = target_images.shape().n;
  if (n < 2) throw ArgumentError("cdc_loss needs at least 2 samples");
  if (source.rows != n || source.cols != n - 1) throw ArgumentError("cdc_loss: batch size differs");
  const std::size_t d = target_images.shape().sample_size();

  const CosineTable<T> table = cosine_table(target_images);
  const SimilarityDistribution<T> target = softmax_rows(table);
  TensorLoss<T> out;
  out.value = cdc_loss(target, source);

  // dL/dp, then softmax backward per row, giving dL/dcos for (row i, col j).
  const T inv_n = T(1) / static_cast<T>(n);
  std::vector<T> grad_cos(n * n, T(0));
  for (std::size_t i = 0; i < n; ++i) {
    T dot = 0;
    std::vector<T> gp(n - 1);
    for (std::size_t c = 0; c < n - 1; ++c) {
      const T p = target.at(i, c);
      gp[c] = inv_n * (std::log(p) - std::log(source.at(i, c)) + T(1));
      dot += p * gp[c];
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const std::size_t c = column_of(i, j);
      grad_cos[i * n + j] = target.at(i, c) * (gp[c] - dot);
    }
  }

  // cos_ij = <x_i, x_j> / (n_i n_j) with n_i = sqrt(|x_i|^2 + eps^2):
  // d cos_ij / d x_i = x_j / (n_i n_j) - cos_ij x_i / n_i^2.
  out.grad = Tensor<T>(target_images.shape());
  for (std::size_t i = 0; i < n; ++i) {
    T* gi = out.grad.sample(i).data();
    const T* xi = target_images.sample(i).data();
    T self_coeff = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const T weight = grad_cos[i * n + j] + grad_cos[j * n + i];
      const T* xj = target_images.sample(j).data();
      const T a = weight / (table.norms[i] * table.norms[j]);
      for (std::size_t k = 0; k < d; ++k) gi[k] += a * xj[k];
      self_coeff += weight * table.cos[i * n + j];
    }
    const T b = self_coeff / (table.norms[i] * table.norms[i]);
    for (std::size_t k = 0; k < d; ++k) gi[k] -= b * xi[k];
  }
  return out;
}

template <typename T>
TensorLoss<T> kd_loss(const Tensor<T>& teacher, const Tensor<T>& student) {
  if (teacher.shape() != student.shape() || teacher.shape().n == 0) {
    throw ArgumentError("kd_loss: shapes " + to_string(teacher.shape()) + " and " +
                        to_string(student.shape()) + " differ");
  }
  const T n = static_cast<T>(teacher.shape().n);
  TensorLoss<T> out;
  out.grad = Tensor<T>(student.shape());
  T total = 0;
  for (std::size_t i = 0; i < student.size(); ++i) {
    const T diff = student[i] - teacher[i];
    total += diff * diff;
    out.grad[i] = T(2) * diff / n;
  }
  out.value = total / n;
  return out;
}

template <typename T>
LogitLoss<T> adv_loss_g(std::span<const T> fake_logits) {
  if (fake_logits.empty()) throw ArgumentError("adv_loss_g: empty batch");
  require_finite(fake_logits, "fake logits");
  const T n = static_cast<T>(fake_logits.size());
  LogitLoss<T> out;
  out.grad.resize(fake_logits.size());
  for (std::size_t i = 0; i < fake_logits.size(); ++i) {
    out.value += softplus(-fake_logits[i]);
    out.grad[i] = -sigmoid(-fake_logits[i]) / n;
  }
  out.value /= n;
  return out;
}

template <typename T>
DiscriminatorLoss<T> adv_loss_d(std::span<const T> real_logits, std::span<const T> fake_logits,
                                const Tensor<T>& real_input_grads, T r1_gamma) {
  if (real_logits.empty() || fake_logits.empty()) throw ArgumentError("adv_loss_d: empty batch");
  require_finite(real_logits, "real logits");
  require_finite(fake_logits, "fake logits");
  require_finite(real_input_grads.values(), "real input gradients");
  if (!std::isfinite(r1_gamma) || r1_gamma < 0) throw NumericError("r1_gamma must be finite and >= 0");
  if (real_input_grads.shape().n != real_logits.size()) {
    throw ArgumentError("adv_loss_d: one input gradient per real sample expected");
  }
  DiscriminatorLoss<T> out;
  const T nr = static_cast<T>(real_logits.size());
  const T nf = static_cast<T>(fake_logits.size());
  out.grad_real.resize(real_logits.size());
  out.grad_fake.resize(fake_logits.size());
  T adv = 0;
  for (std::size_t i = 0; i < real_logits.size(); ++i) {
    adv += softplus(-real_logits[i]) / nr;
    out.grad_real[i] = -sigmoid(-real_logits[i]) / nr;
  }
  for (std::size_t i = 0; i < fake_logits.size(); ++i) {
    adv += softplus(fake_logits[i]) / nf;
    out.grad_fake[i] = sigmoid(fake_logits[i]) / nf;
  }
  T sq = 0;
  for (T g : real_input_grads.values()) sq += g * g;
  out.r1 = r1_gamma / T(2) * sq / nr;
  out.total = adv + out.r1;
  return out;
}

template <typename Real>
R1Penalty<Real> r1_penalty(BasicDiscriminator<Real>& disc, const Tensor<Real>& real, Real gamma,
                           bool accumulate_param_grads) {
  const std::size_t n = real.shape().n;
  if (n == 0) throw ArgumentError("r1_penalty: empty batch");
  R1Penalty<Real> out;
  typename BasicDiscriminator<Real>::template Cache<Real> cache;
  const Tensor<Real> logits = disc.template forward<Real>(real, &cache);
  out.input_grads = disc.template backward<Real>(cache, Tensor<Real>(logits.shape(), Real(1)), {});
  Real sq = 0;
  for (Real g : out.input_grads.values()) sq += g * g;
  out.value = gamma / Real(2) * sq / static_cast<Real>(n);
  if (!accumulate_param_grads || gamma == Real(0)) return out;

  // Forward-over-reverse: tangent of the parameter gradient along grad_x D.
  using D = Dual<Real>;
  std::vector<D> x(real.size());
  for (std::size_t i = 0; i < real.size(); ++i) x[i] = D(real[i], out.input_grads[i]);
  const Tensor<D> dual_real(real.shape(), std::move(x));
  typename BasicDiscriminator<Real>::template Cache<D> dual_cache;
  const Tensor<D> dual_logits = disc.template forward<D>(dual_real, &dual_cache);

  auto& params = disc.params().params();
  std::vector<std::vector<D>> buffers(params.size());
  std::vector<std::span<D>> spans(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable) continue;
    buffers[i].assign(params[i].size(), D{});
    spans[i] = buffers[i];
  }
  disc.template backward<D>(dual_cache, Tensor<D>(dual_logits.shape(), D(Real(1))), spans);
  const Real scale = gamma / static_cast<Real>(n);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable) continue;
    for (std::size_t k = 0; k < buffers[i].size(); ++k) params[i].grad[k] += scale * buffers[i][k].d;
  }
  return out;
}

double teacher_total(double adv, double cdc, const LossWeights& w) { return adv + w.w_t * cdc; }

double student_total(double adv, double kd, double cdc, const LossWeights& w) {
  return adv + w.alpha * kd + w.w_s * cdc;
}

std::string to_csv_row(const LossReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g,%.9g,%.9g", r.step, r.adv, r.kd, r.cdc, r.r1,
                r.total);
  return buf;
}

#define CFTS_LOSSES(T)                                                                              \
  template struct SimilarityDistribution<T>;                                                        \
  template SimilarityDistribution<T> similarity_distribution<T>(const Tensor<T>&);                  \
  template T cdc_loss<T>(const SimilarityDistribution<T>&, const SimilarityDistribution<T>&);       \
  template TensorLoss<T> cdc_loss_and_grad<T>(const Tensor<T>&, const SimilarityDistribution<T>&);  \
  template TensorLoss<T> kd_loss<T>(const Tensor<T>&, const Tensor<T>&);                            \
  template LogitLoss<T> adv_loss_g<T>(std::span<const T>);                                          \
  template DiscriminatorLoss<T> adv_loss_d<T>(std::span<const T>, std::span<const T>,               \
                                              const Tensor<T>&, T);                                 \
  template R1Penalty<T> r1_penalty<T>(BasicDiscriminator<T>&, const Tensor<T>&, T, bool);

CFTS_LOSSES(float)
CFTS_LOSSES(double)

}  // namespace cfts
