// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0

#include "cfts/tensor.hpp"

#include "cfts/dual.hpp"
#include "cfts/error.hpp"

namespace cfts {

std::string to_string(const Shape4& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) + "," +
         std::to_string(s.w) + ")";
}

template <typename T>
Tensor<T>::Tensor(Shape4 shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.count()) {
    throw ShapeError("tensor data size " + std::to_string(data_.size()) + " does not match shape " +
                     to_string(shape_));
  }
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape4 shape) const {
  if (shape.count() != shape_.count()) {
    throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  return Tensor<T>(shape, data_);
}

template <typename T>
Tensor<T> Tensor<T>::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > shape_.n) throw ShapeError("batch slice out of range");
  Shape4 s = shape_;
  s.n = end - begin;
  const std::size_t stride = shape_.sample_size();
  return Tensor<T>(s, std::vector<T>(data_.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                                     data_.begin() + static_cast<std::ptrdiff_t>(end * stride)));
}

template <typename T>
Tensor<T> concat_batch(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) return {};
  Shape4 s = parts.front().shape();
  s.n = 0;
  std::vector<T> data;
  for (const auto& p : parts) {
    Shape4 ps = p.shape();
    if (ps.c != s.c || ps.h != s.h || ps.w != s.w) {
      throw ShapeError("concat_batch: mismatched sample shape " + to_string(ps));
    }
    s.n += ps.n;
    data.insert(data.end(), p.storage().begin(), p.storage().end());
  }
  return Tensor<T>(s, std::move(data));
}

template class Tensor<float>;
template class Tensor<double>;
template class Tensor<Dual<float>>;
template class Tensor<Dual<double>>;
template Tensor<float> concat_batch(const std::vector<Tensor<float>>&);
template Tensor<double> concat_batch(const std::vector<Tensor<double>>&);

}  // namespace cfts
