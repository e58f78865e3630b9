// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0
//
// Training objectives. Every loss is a pure function that returns its value
// together with the gradient w.r.t. its differentiable input, templated on
// the scalar type so the same code runs in float (training) and double
// (finite-difference verification).

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cfts/model.hpp"
#include "cfts/tensor.hpp"

namespace cfts {

struct LossWeights {
  double w_t = 40.0;       // teacher CDC weight
  double w_s = 20.0;       // student CDC weight
  double alpha = 2.0;      // student distillation weight
  double r1_gamma = 10.0;  // discriminator R1 coefficient

  /// Throws ConfigError unless every weight is finite and >= 0.
  void validate() const;
};

/// Row i holds softmax_j(cos(x_i, x_j)) over j != i, in increasing j order.
template <typename T>
struct SimilarityDistribution {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> values;

  T at(std::size_t row, std::size_t col) const { return values[row * cols + col]; }
  /// Throws ArgumentError unless every row is a distribution within `tol`.
  void validate(double tol = 1e-6) const;
};

/// Norm guard used in the cosine similarity: |x| is taken as sqrt(|x|^2 + eps^2).
inline constexpr double kCosineEps = 1e-8;

template <typename T>
SimilarityDistribution<T> similarity_distribution(const Tensor<T>& images);

/// Mean over rows of KL(target_row || source_row).
template <typename T>
T cdc_loss(const SimilarityDistribution<T>& target, const SimilarityDistribution<T>& source);

template <typename T>
struct TensorLoss {
  T value{};
  Tensor<T> grad;
};

template <typename T>
struct LogitLoss {
  T value{};
  std::vector<T> grad;
};

/// CDC between generated target images and a fixed source distribution;
/// `grad` is d(loss)/d(target_images).
template <typename T>
TensorLoss<T> cdc_loss_and_grad(const Tensor<T>& target_images,
                                const SimilarityDistribution<T>& source);

/// (1/N) sum_i |teacher_i - student_i|^2 with the per-sample squared
/// Euclidean norm; `grad` is d(loss)/d(student).
template <typename T>
TensorLoss<T> kd_loss(const Tensor<T>& teacher, const Tensor<T>& student);

/// Non-saturating generator loss mean(softplus(-l)); `grad` is w.r.t. logits.
template <typename T>
LogitLoss<T> adv_loss_g(std::span<const T> fake_logits);

template <typename T>
struct DiscriminatorLoss {
  T total{};  // softplus terms + r1
  T r1{};
  std::vector<T> grad_real;
  std::vector<T> grad_fake;
};

/// mean(softplus(-real)) + mean(softplus(fake)) + (gamma/2) E|grad_x D(x)|^2,
/// where `real_input_grads` holds grad_x D(x) for every real sample.
template <typename T>
DiscriminatorLoss<T> adv_loss_d(std::span<const T> real_logits, std::span<const T> fake_logits,
                                const Tensor<T>& real_input_grads, T r1_gamma);

template <typename Real>
struct R1Penalty {
  Real value{};
  Tensor<Real> input_grads;  // grad_x D(x) per real sample
};

/// Evaluates the R1 penalty on `real` and, if requested, accumulates its exact
/// parameter gradient into the discriminator's trainable grad buffers.
template <typename Real>
R1Penalty<Real> r1_penalty(BasicDiscriminator<Real>& disc, const Tensor<Real>& real, Real gamma,
                           bool accumulate_param_grads);

double teacher_total(double adv, double cdc, const LossWeights& w);
double student_total(double adv, double kd, double cdc, const LossWeights& w);

struct LossReport {
  std::size_t step = 0;
  double adv = 0.0;
  double kd = 0.0;
  double cdc = 0.0;
  double r1 = 0.0;
  double total = 0.0;
};

inline constexpr const char* kLossCsvHeader = "step,adv,kd,cdc,r1,total";
std::string to_csv_row(const LossReport& r);

}  // namespace cfts
