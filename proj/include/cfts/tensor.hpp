// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cfts {

/// NCHW extents. Vectors (latents, logits, dense activations) use h = w = 1.
struct Shape4 {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t count() const noexcept { return n * c * h * w; }
  std::size_t sample_size() const noexcept { return c * h * w; }
  std::size_t plane() const noexcept { return h * w; }
  bool operator==(const Shape4&) const = default;
};

std::string to_string(const Shape4& s);

/// Dense row-major NCHW tensor with value semantics.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape4 shape, T fill = T{}) : shape_(shape), data_(shape.count(), fill) {}
  Tensor(Shape4 shape, std::vector<T> data);

  const Shape4& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  std::span<T> sample(std::size_t i) noexcept {
    return std::span<T>(data_).subspan(i * shape_.sample_size(), shape_.sample_size());
  }
  std::span<const T> sample(std::size_t i) const noexcept {
    return std::span<const T>(data_).subspan(i * shape_.sample_size(), shape_.sample_size());
  }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }

  /// Same storage, new extents with equal element count.
  Tensor reshaped(Shape4 shape) const;

  /// Rows [begin, end) along the batch axis.
  Tensor slice(std::size_t begin, std::size_t end) const;

 private:
  Shape4 shape_{};
  std::vector<T> data_;
};

/// Image batches are NCHW floats in [-1, 1].
using ImageBatch = Tensor<float>;

/// Concatenates batches with identical per-sample extents.
template <typename T>
Tensor<T> concat_batch(const std::vector<Tensor<T>>& parts);

/// Element type conversion (float <-> double).
template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
  std::vector<To> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = static_cast<To>(t[i]);
  return Tensor<To>(t.shape(), std::move(out));
}

}  // namespace cfts
