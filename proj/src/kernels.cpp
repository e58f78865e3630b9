// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0

#include "cfts/kernels.hpp"

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "cfts/error.hpp"

namespace cfts::nn {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename R>
void real_gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const R* a,
               const R* b, R* c, bool accumulate) {
  const auto rows_a = static_cast<Eigen::Index>(ta == Trans::no ? m : k);
  const auto cols_a = static_cast<Eigen::Index>(ta == Trans::no ? k : m);
  const auto rows_b = static_cast<Eigen::Index>(tb == Trans::no ? k : n);
  const auto cols_b = static_cast<Eigen::Index>(tb == Trans::no ? n : k);
  Eigen::Map<const RowMat<R>> A(a, rows_a, cols_a);
  Eigen::Map<const RowMat<R>> B(b, rows_b, cols_b);
  Eigen::Map<RowMat<R>> C(c, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  if (!accumulate) C.setZero();
  if (ta == Trans::no && tb == Trans::no) {
    C.noalias() += A * B;
  } else if (ta == Trans::no) {
    C.noalias() += A * B.transpose();
  } else if (tb == Trans::no) {
    C.noalias() += A.transpose() * B;
  } else {
    C.noalias() += A.transpose() * B.transpose();
  }
}

// Value and tangent planes of a GEMM operand. Real operands are used in place.
template <typename T>
struct Planes {
  using R = real_of_t<T>;
  const R* v = nullptr;
  const R* d = nullptr;
  std::vector<R> v_store;
  std::vector<R> d_store;

  Planes(const T* p, std::size_t count) {
    if constexpr (is_dual_v<T>) {
      v_store.resize(count);
      d_store.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        v_store[i] = p[i].v;
        d_store[i] = p[i].d;
      }
      v = v_store.data();
      d = d_store.data();
    } else {
      v = p;
    }
  }
};

template <typename S>
void im2col(const ConvGeometry& g, const S* x, S* cols) {
  const std::size_t oh = g.out_h();
  const std::size_t ow = g.out_w();
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    const S* plane = x + c * g.in_h * g.in_w;
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx, ++row) {
        S* out = cols + row * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - pad;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - pad;
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.in_h) &&
                                ix < static_cast<std::ptrdiff_t>(g.in_w);
            out[oy * ow + ox] =
                inside ? plane[static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)]
                       : S{};
          }
        }
      }
    }
  }
}

template <typename S>
void col2im_add(const ConvGeometry& g, const S* cols, S* x) {
  const std::size_t oh = g.out_h();
  const std::size_t ow = g.out_w();
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    S* plane = x + c * g.in_h * g.in_w;
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx, ++row) {
        const S* in = cols + row * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - pad;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
            plane[static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)] +=
                in[oy * ow + ox];
          }
        }
      }
    }
  }
}

bool is_pointwise(const ConvGeometry& g) { return g.kernel == 1 && g.stride == 1 && g.pad == 0; }

}  // namespace

template <typename TA, typename TB, typename TC>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const TA* a, const TB* b,
          TC* c, bool accumulate) {
  using R = real_of_t<TC>;
  static_assert(std::is_same_v<real_of_t<TA>, R> && std::is_same_v<real_of_t<TB>, R>);
  if constexpr (!is_dual_v<TC>) {
    static_assert(!is_dual_v<TA> && !is_dual_v<TB>);
    real_gemm<R>(ta, tb, m, n, k, a, b, c, accumulate);
  } else {
    Planes<TA> pa(a, m * k);
    Planes<TB> pb(b, k * n);
    std::vector<R> cv(m * n, R{});
    std::vector<R> cd(m * n, R{});
    if (accumulate) {
      for (std::size_t i = 0; i < m * n; ++i) {
        cv[i] = c[i].v;
        cd[i] = c[i].d;
      }
    }
    real_gemm<R>(ta, tb, m, n, k, pa.v, pb.v, cv.data(), true);
    if (pa.d != nullptr) real_gemm<R>(ta, tb, m, n, k, pa.d, pb.v, cd.data(), true);
    if (pb.d != nullptr) real_gemm<R>(ta, tb, m, n, k, pa.v, pb.d, cd.data(), true);
    for (std::size_t i = 0; i < m * n; ++i) c[i] = TC(cv[i], cd[i]);
  }
}

template <typename S, typename R>
Tensor<S> conv2d_forward(const ConvGeometry& g, const Tensor<S>& x, std::span<const R> weight,
                         std::span<const R> bias) {
  const Shape4& xs = x.shape();
  if (xs.c != g.in_channels || xs.h != g.in_h || xs.w != g.in_w) {
    throw ShapeError("conv2d: input " + to_string(xs) + " does not match layer geometry");
  }
  if (weight.size() != g.weight_count() || bias.size() != g.out_channels) {
    throw ShapeError("conv2d: parameter size mismatch");
  }
  const std::size_t plane = g.out_h() * g.out_w();
  const std::size_t patch = g.in_channels * g.kernel * g.kernel;
  Tensor<S> y({xs.n, g.out_channels, g.out_h(), g.out_w()});
  std::vector<S> cols(is_pointwise(g) ? 0 : patch * plane);
  for (std::size_t s = 0; s < xs.n; ++s) {
    const S* src = x.sample(s).data();
    if (!is_pointwise(g)) {
      im2col(g, src, cols.data());
      src = cols.data();
    }
    S* out = y.sample(s).data();
    gemm(Trans::no, Trans::no, g.out_channels, plane, patch, weight.data(), src, out, false);
    for (std::size_t o = 0; o < g.out_channels; ++o) {
      const S b = S(bias[o]);
      for (std::size_t p = 0; p < plane; ++p) out[o * plane + p] += b;
    }
  }
  return y;
}

template <typename S, typename R>
void conv2d_backward(const ConvGeometry& g, const Tensor<S>& x, std::span<const R> weight,
                     const Tensor<S>& grad_y, Tensor<S>* grad_x, std::span<S> grad_weight,
                     std::span<S> grad_bias) {
  const std::size_t n = x.shape().n;
  const std::size_t plane = g.out_h() * g.out_w();
  const std::size_t patch = g.in_channels * g.kernel * g.kernel;
  if (grad_y.shape() != Shape4{n, g.out_channels, g.out_h(), g.out_w()}) {
    throw ShapeError("conv2d backward: gradient shape " + to_string(grad_y.shape()));
  }
  const bool want_w = !grad_weight.empty();
  const bool want_b = !grad_bias.empty();
  if (want_w && grad_weight.size() != g.weight_count()) throw ShapeError("conv2d: weight grad size");
  if (want_b && grad_bias.size() != g.out_channels) throw ShapeError("conv2d: bias grad size");
  if (grad_x != nullptr) *grad_x = Tensor<S>(x.shape());

  const bool pointwise = is_pointwise(g);
  std::vector<S> cols(pointwise ? 0 : patch * plane);
  std::vector<S> grad_cols(pointwise ? 0 : patch * plane);
  for (std::size_t s = 0; s < n; ++s) {
    const S* gy = grad_y.sample(s).data();
    if (want_w) {
      const S* src = x.sample(s).data();
      if (!pointwise) {
        im2col(g, src, cols.data());
        src = cols.data();
      }
      gemm(Trans::no, Trans::yes, g.out_channels, patch, plane, gy, src, grad_weight.data(), true);
    }
    if (want_b) {
      for (std::size_t o = 0; o < g.out_channels; ++o) {
        S acc{};
        for (std::size_t p = 0; p < plane; ++p) acc += gy[o * plane + p];
        grad_bias[o] += acc;
      }
    }
    if (grad_x != nullptr) {
      S* gx = grad_x->sample(s).data();
      if (pointwise) {
        gemm(Trans::yes, Trans::no, patch, plane, g.out_channels, weight.data(), gy, gx, false);
      } else {
        gemm(Trans::yes, Trans::no, patch, plane, g.out_channels, weight.data(), gy,
             grad_cols.data(), false);
        col2im_add(g, grad_cols.data(), gx);
      }
    }
  }
}

template <typename S, typename R>
Tensor<S> dense_forward(const Tensor<S>& x, std::span<const R> weight, std::span<const R> bias,
                        std::size_t out_features) {
  const std::size_t n = x.shape().n;
  const std::size_t in = x.shape().sample_size();
  if (weight.size() != out_features * in || bias.size() != out_features) {
    throw ShapeError("dense: input " + to_string(x.shape()) + " does not match parameters");
  }
  Tensor<S> y({n, out_features, 1, 1});
  gemm(Trans::no, Trans::yes, n, out_features, in, x.data(), weight.data(), y.data(), false);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t o = 0; o < out_features; ++o) y[s * out_features + o] += S(bias[o]);
  }
  return y;
}

template <typename S, typename R>
void dense_backward(const Tensor<S>& x, std::span<const R> weight, const Tensor<S>& grad_y,
                    Tensor<S>* grad_x, std::span<S> grad_weight, std::span<S> grad_bias) {
  const std::size_t n = x.shape().n;
  const std::size_t in = x.shape().sample_size();
  const std::size_t out = grad_y.shape().sample_size();
  if (grad_y.shape().n != n || weight.size() != out * in) {
    throw ShapeError("dense backward: gradient shape " + to_string(grad_y.shape()));
  }
  if (!grad_weight.empty()) {
    gemm(Trans::yes, Trans::no, out, in, n, grad_y.data(), x.data(), grad_weight.data(), true);
  }
  if (!grad_bias.empty()) {
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t o = 0; o < out; ++o) grad_bias[o] += grad_y[s * out + o];
    }
  }
  if (grad_x != nullptr) {
    *grad_x = Tensor<S>(x.shape());
    gemm(Trans::no, Trans::no, n, in, out, grad_y.data(), weight.data(), grad_x->data(), false);
  }
}

template <typename S>
void leaky_relu_inplace(Tensor<S>& x, double slope) {
  const auto k = static_cast<real_of_t<S>>(slope);
  for (auto& v : x.values()) {
    if (!(value_of(v) > 0)) v = v * k;
  }
}

template <typename S>
void leaky_relu_backward_inplace(const Tensor<S>& y, Tensor<S>& grad, double slope) {
  const auto k = static_cast<real_of_t<S>>(slope);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(value_of(y[i]) > 0)) grad[i] = grad[i] * k;
  }
}

template <typename S>
Tensor<S> upsample2x_forward(const Tensor<S>& x) {
  const Shape4& s = x.shape();
  Tensor<S> y({s.n, s.c, s.h * 2, s.w * 2});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t i = 0; i < s.h * 2; ++i) {
        for (std::size_t j = 0; j < s.w * 2; ++j) y.at(n, c, i, j) = x.at(n, c, i / 2, j / 2);
      }
    }
  }
  return y;
}

template <typename S>
Tensor<S> upsample2x_backward(const Tensor<S>& grad_y) {
  const Shape4& s = grad_y.shape();
  Tensor<S> gx({s.n, s.c, s.h / 2, s.w / 2});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t i = 0; i < s.h; ++i) {
        for (std::size_t j = 0; j < s.w; ++j) gx.at(n, c, i / 2, j / 2) += grad_y.at(n, c, i, j);
      }
    }
  }
  return gx;
}

template <typename S>
Tensor<S> avgpool2x_forward(const Tensor<S>& x) {
  const Shape4& s = x.shape();
  Tensor<S> y({s.n, s.c, s.h / 2, s.w / 2});
  const auto quarter = static_cast<real_of_t<S>>(0.25);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t i = 0; i < s.h / 2; ++i) {
        for (std::size_t j = 0; j < s.w / 2; ++j) {
          S acc = x.at(n, c, 2 * i, 2 * j);
          acc += x.at(n, c, 2 * i, 2 * j + 1);
          acc += x.at(n, c, 2 * i + 1, 2 * j);
          acc += x.at(n, c, 2 * i + 1, 2 * j + 1);
          y.at(n, c, i, j) = acc * quarter;
        }
      }
    }
  }
  return y;
}

template <typename T>
void tanh_inplace(Tensor<T>& x) {
  for (auto& v : x.values()) v = std::tanh(v);
}

template <typename T>
void tanh_backward_inplace(const Tensor<T>& y, Tensor<T>& grad) {
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= T(1) - y[i] * y[i];
}

template <typename T>
Tensor<T> adapter_forward(const Tensor<T>& h, std::span<const T> scale, std::span<const T> shift,
                          std::span<const T> mix, Tensor<T>& affine_out) {
  const Shape4& s = h.shape();
  if (scale.size() != s.c || shift.size() != s.c || mix.size() != s.c * s.c) {
    throw ShapeError("adapter: parameters do not match " + to_string(s));
  }
  const std::size_t plane = s.plane();
  affine_out = Tensor<T>(s);
  Tensor<T> y(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    const T* hs = h.sample(n).data();
    T* as = affine_out.sample(n).data();
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t p = 0; p < plane; ++p) as[c * plane + p] = hs[c * plane + p] * scale[c] + shift[c];
    }
    T* ys = y.sample(n).data();
    gemm(Trans::no, Trans::no, s.c, plane, s.c, mix.data(), as, ys, false);
    for (std::size_t i = 0; i < s.sample_size(); ++i) ys[i] = as[i] + ys[i];
  }
  return y;
}

template <typename T>
Tensor<T> adapter_backward(const Tensor<T>& h, const Tensor<T>& affine, std::span<const T> scale,
                           std::span<const T> mix, const Tensor<T>& grad_y, std::span<T> grad_scale,
                           std::span<T> grad_shift, std::span<T> grad_mix) {
  const Shape4& s = h.shape();
  const std::size_t plane = s.plane();
  Tensor<T> grad_h(s);
  std::vector<T> grad_a(s.sample_size());
  for (std::size_t n = 0; n < s.n; ++n) {
    const T* gy = grad_y.sample(n).data();
    const T* as = affine.sample(n).data();
    const T* hs = h.sample(n).data();
    gemm(Trans::yes, Trans::no, s.c, plane, s.c, mix.data(), gy, grad_a.data(), false);
    for (std::size_t i = 0; i < grad_a.size(); ++i) grad_a[i] += gy[i];
    if (!grad_mix.empty()) {
      gemm(Trans::no, Trans::yes, s.c, s.c, plane, gy, as, grad_mix.data(), true);
    }
    T* gh = grad_h.sample(n).data();
    for (std::size_t c = 0; c < s.c; ++c) {
      T gs{};
      T gb{};
      for (std::size_t p = 0; p < plane; ++p) {
        const T ga = grad_a[c * plane + p];
        gs += ga * hs[c * plane + p];
        gb += ga;
        gh[c * plane + p] = ga * scale[c];
      }
      if (!grad_scale.empty()) grad_scale[c] += gs;
      if (!grad_shift.empty()) grad_shift[c] += gb;
    }
  }
  return grad_h;
}

// Explicit instantiations.

#define CFTS_GEMM(TA, TB, TC)                                                                  \
  template void gemm<TA, TB, TC>(Trans, Trans, std::size_t, std::size_t, std::size_t, const TA*, \
                                 const TB*, TC*, bool);

#define CFTS_LAYERS(S, R)                                                                        \
  template Tensor<S> conv2d_forward<S, R>(const ConvGeometry&, const Tensor<S>&,                 \
                                          std::span<const R>, std::span<const R>);               \
  template void conv2d_backward<S, R>(const ConvGeometry&, const Tensor<S>&, std::span<const R>, \
                                      const Tensor<S>&, Tensor<S>*, std::span<S>, std::span<S>); \
  template Tensor<S> dense_forward<S, R>(const Tensor<S>&, std::span<const R>,                   \
                                         std::span<const R>, std::size_t);                       \
  template void dense_backward<S, R>(const Tensor<S>&, std::span<const R>, const Tensor<S>&,     \
                                     Tensor<S>*, std::span<S>, std::span<S>);                    \
  template void leaky_relu_inplace<S>(Tensor<S>&, double);                                       \
  template void leaky_relu_backward_inplace<S>(const Tensor<S>&, Tensor<S>&, double);            \
  template Tensor<S> upsample2x_forward<S>(const Tensor<S>&);                                    \
  template Tensor<S> upsample2x_backward<S>(const Tensor<S>&);                                   \
  template Tensor<S> avgpool2x_forward<S>(const Tensor<S>&);

#define CFTS_REAL_ONLY(T)                                                                        \
  template void tanh_inplace<T>(Tensor<T>&);                                                     \
  template void tanh_backward_inplace<T>(const Tensor<T>&, Tensor<T>&);                          \
  template Tensor<T> adapter_forward<T>(const Tensor<T>&, std::span<const T>, std::span<const T>, \
                                        std::span<const T>, Tensor<T>&);                         \
  template Tensor<T> adapter_backward<T>(const Tensor<T>&, const Tensor<T>&, std::span<const T>, \
                                         std::span<const T>, const Tensor<T>&, std::span<T>,     \
                                         std::span<T>, std::span<T>);

CFTS_GEMM(float, float, float)
CFTS_GEMM(double, double, double)
CFTS_GEMM(float, Dual<float>, Dual<float>)
CFTS_GEMM(double, Dual<double>, Dual<double>)
CFTS_GEMM(Dual<float>, float, Dual<float>)
CFTS_GEMM(Dual<double>, double, Dual<double>)
CFTS_GEMM(Dual<float>, Dual<float>, Dual<float>)
CFTS_GEMM(Dual<double>, Dual<double>, Dual<double>)

CFTS_LAYERS(float, float)
CFTS_LAYERS(double, double)
CFTS_LAYERS(Dual<float>, float)
CFTS_LAYERS(Dual<double>, double)

CFTS_REAL_ONLY(float)
CFTS_REAL_ONLY(double)

}  // namespace cfts::nn
