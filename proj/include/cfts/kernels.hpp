// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0
//
// Forward/backward kernels for the layer types used by the generator,
// discriminator and feature extractor. Activations are of scalar type S
// (float, double or Dual<...>); parameters are of real type R. Backward
// functions accumulate (+=) into the gradient spans they are given and skip
// any gradient whose span is empty or whose pointer is null.

#pragma once

#include <cstddef>
#include <span>

#include "cfts/dual.hpp"
#include "cfts/tensor.hpp"

namespace cfts::nn {

enum class Trans { no, yes };

/// c(m x n) = op(a) * op(b) (+ c when accumulate). Row-major storage; a is
/// m x k (k x m when transposed), b is k x n (n x k when transposed).
template <typename TA, typename TB, typename TC>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const TA* a, const TB* b,
          TC* c, bool accumulate);

struct ConvGeometry {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pad = 1;
  std::size_t in_h = 0;
  std::size_t in_w = 0;

  std::size_t out_h() const noexcept { return (in_h + 2 * pad - kernel) / stride + 1; }
  std::size_t out_w() const noexcept { return (in_w + 2 * pad - kernel) / stride + 1; }
  std::size_t weight_count() const noexcept { return out_channels * in_channels * kernel * kernel; }
};

// Weight layout: [out][in][ky][kx]; bias: [out].
template <typename S, typename R>
Tensor<S> conv2d_forward(const ConvGeometry& g, const Tensor<S>& x, std::span<const R> weight,
                         std::span<const R> bias);

template <typename S, typename R>
void conv2d_backward(const ConvGeometry& g, const Tensor<S>& x, std::span<const R> weight,
                     const Tensor<S>& grad_y, Tensor<S>* grad_x, std::span<S> grad_weight,
                     std::span<S> grad_bias);

// Weight layout: [out][in]; x is (n, in, 1, 1) or any shape with sample_size == in.
template <typename S, typename R>
Tensor<S> dense_forward(const Tensor<S>& x, std::span<const R> weight, std::span<const R> bias,
                        std::size_t out_features);

template <typename S, typename R>
void dense_backward(const Tensor<S>& x, std::span<const R> weight, const Tensor<S>& grad_y,
                    Tensor<S>* grad_x, std::span<S> grad_weight, std::span<S> grad_bias);

/// In place. The backward pass reads the activation output, whose sign
/// equals the sign of its input for a positive slope.
template <typename S>
void leaky_relu_inplace(Tensor<S>& x, double slope);

template <typename S>
void leaky_relu_backward_inplace(const Tensor<S>& y, Tensor<S>& grad, double slope);

template <typename S>
Tensor<S> upsample2x_forward(const Tensor<S>& x);

template <typename S>
Tensor<S> upsample2x_backward(const Tensor<S>& grad_y);

template <typename S>
Tensor<S> avgpool2x_forward(const Tensor<S>& x);

template <typename T>
void tanh_inplace(Tensor<T>& x);

template <typename T>
void tanh_backward_inplace(const Tensor<T>& y, Tensor<T>& grad);

/// Task adapter applied to a block output h (n, c, hh, ww):
///   a = scale (.) h + shift   (channelwise)
///   y = a + mix * a           (1x1 convolution, mix is c x c)
/// Returns y; `affine_out` receives a for the backward pass.
template <typename T>
Tensor<T> adapter_forward(const Tensor<T>& h, std::span<const T> scale, std::span<const T> shift,
                          std::span<const T> mix, Tensor<T>& affine_out);

template <typename T>
Tensor<T> adapter_backward(const Tensor<T>& h, const Tensor<T>& affine, std::span<const T> scale,
                           std::span<const T> mix, const Tensor<T>& grad_y, std::span<T> grad_scale,
                           std::span<T> grad_shift, std::span<T> grad_mix);

}  // namespace cfts::nn
