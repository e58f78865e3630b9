// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0
//
// Forward-mode dual numbers. Running the discriminator's reverse pass on
// Dual<R> values whose tangent is seeded with a direction v in input space
// yields, in the tangent of every parameter gradient, the mixed second
// derivative (d/dtheta)(grad_x D . v). With v = grad_x D this is exactly the
// parameter gradient of the R1 penalty, without a second reverse sweep.

#pragma once

#include <type_traits>

namespace cfts {

template <typename R>
struct Dual {
  R v{};  // value
  R d{};  // tangent

  constexpr Dual() = default;
  constexpr Dual(R value) : v(value) {}  // NOLINT: implicit lift of constants
  constexpr Dual(R value, R tangent) : v(value), d(tangent) {}

  constexpr Dual& operator+=(const Dual& o) {
    v += o.v;
    d += o.d;
    return *this;
  }
  constexpr Dual& operator-=(const Dual& o) {
    v -= o.v;
    d -= o.d;
    return *this;
  }
  constexpr Dual& operator*=(const Dual& o) {
    d = d * o.v + v * o.d;
    v *= o.v;
    return *this;
  }
};

template <typename R>
constexpr Dual<R> operator+(Dual<R> a, const Dual<R>& b) { return a += b; }
template <typename R>
constexpr Dual<R> operator-(Dual<R> a, const Dual<R>& b) { return a -= b; }
template <typename R>
constexpr Dual<R> operator*(Dual<R> a, const Dual<R>& b) { return a *= b; }
template <typename R>
constexpr Dual<R> operator*(const Dual<R>& a, R s) { return {a.v * s, a.d * s}; }
template <typename R>
constexpr Dual<R> operator*(R s, const Dual<R>& a) { return {a.v * s, a.d * s}; }
template <typename R>
constexpr Dual<R> operator-(const Dual<R>& a) { return {-a.v, -a.d}; }

template <typename T>
struct is_dual : std::false_type {};
template <typename R>
struct is_dual<Dual<R>> : std::true_type {};
template <typename T>
inline constexpr bool is_dual_v = is_dual<T>::value;

/// Underlying real type of a scalar (float for Dual<float>).
template <typename T>
struct real_of {
  using type = T;
};
template <typename R>
struct real_of<Dual<R>> {
  using type = R;
};
template <typename T>
using real_of_t = typename real_of<T>::type;

template <typename T>
constexpr real_of_t<T> value_of(const T& x) {
  if constexpr (is_dual_v<T>) {
    return x.v;
  } else {
    return x;
  }
}

}  // namespace cfts
