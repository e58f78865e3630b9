// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0
//
// Generator and discriminator as explicit layer stacks over named parameter
// groups. The generator separates its global weights from per-task adapter
// banks; the discriminator exposes a trainable-suffix freezing mask.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cfts/kernels.hpp"
#include "cfts/tensor.hpp"

namespace cfts {

template <typename Real>
struct Parameter {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<Real> value;
  std::vector<Real> grad;
  bool trainable = true;

  std::size_t size() const noexcept { return value.size(); }
};

template <typename Real>
class ParameterGroup {
 public:
  ParameterGroup() = default;
  explicit ParameterGroup(std::string name) : name_(std::move(name)) {}

  /// Appends a zero-initialized parameter.
  Parameter<Real>& add(std::string name, std::vector<std::size_t> shape);

  const std::string& name() const noexcept { return name_; }
  std::vector<Parameter<Real>>& params() noexcept { return params_; }
  const std::vector<Parameter<Real>>& params() const noexcept { return params_; }

  /// Total number of scalars.
  std::size_t count() const noexcept;
  Parameter<Real>& at(std::string_view name);
  const Parameter<Real>& at(std::string_view name) const;

  void zero_grad();
  void set_trainable(bool trainable);

  /// Bitwise comparison of names, shapes and values.
  bool same_values(const ParameterGroup& other) const;

 private:
  std::string name_;
  std::vector<Parameter<Real>> params_;
};

struct GeneratorConfig {
  std::size_t latent_dim = 64;
  std::size_t resolution = 32;
  std::size_t channels = 1;
  std::size_t max_width = 32;
  std::size_t min_width = 8;
  std::uint64_t seed = 0;

  /// Throws ConfigError on invalid values.
  void validate() const;
  /// Architecture identity: everything except the seed.
  bool same_architecture(const GeneratorConfig& o) const noexcept;
};

struct DiscriminatorConfig {
  std::size_t resolution = 32;
  std::size_t channels = 1;
  std::size_t base_width = 8;
  std::size_t max_width = 32;
  std::size_t hidden = 64;
  std::uint64_t seed = 0;

  void validate() const;
  bool same_architecture(const DiscriminatorConfig& o) const noexcept;
};

/// Latent codes z ~ N(0, I), shape (N, latent_dim, 1, 1).
struct NoiseBatch {
  Tensor<float> values;
  std::uint64_t seed = 0;

  std::size_t batch_size() const noexcept { return values.shape().n; }
  std::size_t latent_dim() const noexcept { return values.shape().c; }
};

/// Per-task parameters injected after every generator block: a channelwise
/// affine followed by a residual 1x1 convolution. Created as the identity.
template <typename Real>
struct AdapterBank {
  std::string task_id;
  ParameterGroup<Real> params;

  std::size_t param_count() const noexcept { return params.count(); }
};

template <typename Real>
class BasicGenerator {
 public:
  struct Cache {
    Tensor<Real> z;
    std::vector<Tensor<Real>> conv_inputs;  // upsampled input of block b (b >= 1)
    std::vector<Tensor<Real>> activations;  // post-LeakyReLU output of block b
    std::vector<Tensor<Real>> affine;       // adapter affine output of block b
    std::vector<Tensor<Real>> block_outputs;
    Tensor<Real> images;
    const AdapterBank<Real>* bank = nullptr;
  };

  explicit BasicGenerator(const GeneratorConfig& config);

  const GeneratorConfig& config() const noexcept { return config_; }
  std::size_t block_count() const noexcept { return widths_.size(); }
  std::size_t block_width(std::size_t block) const { return widths_.at(block); }

  ParameterGroup<Real>& global_params() noexcept { return global_; }
  const ParameterGroup<Real>& global_params() const noexcept { return global_; }

  /// Creates an identity adapter bank. Throws ConflictError on duplicates.
  AdapterBank<Real>& add_task_adapters(const std::string& task_id);
  /// Routes subsequent forward passes through a bank (or none). Throws
  /// NotFoundError for unknown ids. Never touches parameter values.
  void set_active_task(std::optional<std::string> task_id);
  const std::optional<std::string>& active_task() const noexcept { return active_; }

  bool has_task(const std::string& task_id) const { return banks_.contains(task_id); }
  const std::vector<std::string>& task_ids() const noexcept { return task_order_; }
  AdapterBank<Real>& bank(const std::string& task_id);
  const AdapterBank<Real>& bank(const std::string& task_id) const;

  /// Pure forward pass: a function of parameters, noise and active task.
  Tensor<Real> generate(const Tensor<Real>& z) const;
  Tensor<Real> generate(const NoiseBatch& noise) const;

  Tensor<Real> forward(const Tensor<Real>& z, Cache& cache) const;
  /// Accumulates dL/dtheta into the grad buffers of trainable parameters
  /// (global group and the bank that was active during forward).
  void backward(const Cache& cache, const Tensor<Real>& grad_images);

  /// Copies global weights from an identically shaped generator. Adapter
  /// banks are not copied. Throws ShapeError on architecture mismatch.
  void clone_weights_from(const BasicGenerator& source);

  /// Marks every adapter bank frozen except `task_id` (which is unfrozen).
  void freeze_banks_except(const std::optional<std::string>& task_id);

  std::vector<Parameter<Real>*> trainable_parameters();
  void zero_grad();

 private:
  const AdapterBank<Real>* active_bank() const;

  GeneratorConfig config_;
  std::vector<std::size_t> widths_;
  ParameterGroup<Real> global_;
  std::map<std::string, AdapterBank<Real>> banks_;
  std::vector<std::string> task_order_;
  std::optional<std::string> active_;
};

template <typename Real>
class BasicDiscriminator {
 public:
  enum class LayerKind { conv, dense };

  struct Layer {
    LayerKind kind = LayerKind::conv;
    nn::ConvGeometry conv;        // conv layers
    std::size_t in_features = 0;  // dense layers
    std::size_t out_features = 0;
    bool activation = true;
    std::size_t weight_index = 0;  // into params().params()
    std::size_t bias_index = 0;
  };

  template <typename S>
  struct Cache {
    std::vector<Tensor<S>> inputs;
    std::vector<Tensor<S>> outputs;
  };

  explicit BasicDiscriminator(const DiscriminatorConfig& config);

  const DiscriminatorConfig& config() const noexcept { return config_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::size_t total_layers() const noexcept { return layers_.size(); }
  std::size_t trainable_suffix() const noexcept { return trainable_suffix_; }

  /// Only the last k layers remain trainable. Throws RangeError for k > L.
  void set_trainable_suffix(std::size_t k);
  bool layer_trainable(std::size_t layer) const { return layer + trainable_suffix_ >= layers_.size(); }

  ParameterGroup<Real>& params() noexcept { return params_; }
  const ParameterGroup<Real>& params() const noexcept { return params_; }

  /// Logits of shape (N, 1, 1, 1). `cache` may be null for inference.
  template <typename S>
  Tensor<S> forward(const Tensor<S>& x, Cache<S>* cache) const;

  /// Returns dL/dx. `param_grads` is either empty (input gradient only) or
  /// holds one span per parameter; empty spans are skipped.
  template <typename S>
  Tensor<S> backward(const Cache<S>& cache, const Tensor<S>& grad_logits,
                     const std::vector<std::span<S>>& param_grads) const;

  Tensor<Real> logits(const Tensor<Real>& x) const { return forward<Real>(x, nullptr); }

  /// Spans over the grad buffers of trainable parameters (empty if frozen).
  std::vector<std::span<Real>> trainable_grad_spans();

  void clone_weights_from(const BasicDiscriminator& source);
  std::vector<Parameter<Real>*> trainable_parameters();
  void zero_grad() { params_.zero_grad(); }

 private:
  DiscriminatorConfig config_;
  std::vector<Layer> layers_;
  std::vector<std::size_t> layer_of_param_;
  ParameterGroup<Real> params_;
  std::size_t trainable_suffix_ = 0;
};

using Generator = BasicGenerator<float>;
using Discriminator = BasicDiscriminator<float>;

Generator build_generator(const GeneratorConfig& config);
Discriminator build_discriminator(const DiscriminatorConfig& config);

/// Number of parameterized layers for a discriminator at this resolution.
std::size_t discriminator_depth(std::size_t resolution);

}  // namespace cfts
