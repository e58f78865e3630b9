// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0

#include "cfts/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <random>

#include "cfts/error.hpp"

namespace cfts {
namespace {

constexpr double kLeakySlope = 0.2;
constexpr std::size_t kBaseResolution = 4;

template <typename Real>
void fill_normal(Parameter<Real>& p, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : p.value) v = static_cast<Real>(dist(rng));
}

std::size_t log2_exact(std::size_t v) { return static_cast<std::size_t>(std::countr_zero(v)); }

void check_resolution(std::size_t resolution) {
  if (resolution < 8 || !std::has_single_bit(resolution)) {
    throw ConfigError("resolution must be a power of two >= 8, got " + std::to_string(resolution));
  }
}

template <typename Real>
std::span<Real> grad_span(Parameter<Real>& p) {
  return p.trainable ? std::span<Real>(p.grad) : std::span<Real>();
}

template <typename Real>
std::span<const Real> value_span(const Parameter<Real>& p) {
  return std::span<const Real>(p.value);
}

}  // namespace

// ---------------------------------------------------------------------------
// ParameterGroup

template <typename Real>
Parameter<Real>& ParameterGroup<Real>::add(std::string name, std::vector<std::size_t> shape) {
  std::size_t count = 1;
  for (auto d : shape) count *= d;
  Parameter<Real> p;
  p.name = std::move(name);
  p.shape = std::move(shape);
  p.value.assign(count, Real{});
  p.grad.assign(count, Real{});
  params_.push_back(std::move(p));
  return params_.back();
}

template <typename Real>
std::size_t ParameterGroup<Real>::count() const noexcept {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.size();
  return total;
}

template <typename Real>
Parameter<Real>& ParameterGroup<Real>::at(std::string_view name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw NotFoundError("parameter '" + std::string(name) + "' not in group '" + name_ + "'");
}

template <typename Real>
const Parameter<Real>& ParameterGroup<Real>::at(std::string_view name) const {
  return const_cast<ParameterGroup*>(this)->at(name);
}

template <typename Real>
void ParameterGroup<Real>::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), Real{});
}

template <typename Real>
void ParameterGroup<Real>::set_trainable(bool trainable) {
  for (auto& p : params_) p.trainable = trainable;
}

template <typename Real>
bool ParameterGroup<Real>::same_values(const ParameterGroup& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& a = params_[i];
    const auto& b = other.params_[i];
    if (a.name != b.name || a.shape != b.shape || a.value.size() != b.value.size()) return false;
    if (std::memcmp(a.value.data(), b.value.data(), a.value.size() * sizeof(Real)) != 0) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Configs

void GeneratorConfig::validate() const {
  if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  check_resolution(resolution);
  if (channels != 1 && channels != 3) throw ConfigError("channels must be 1 or 3");
  if (min_width < 1 || max_width < min_width) throw ConfigError("invalid generator widths");
}

bool GeneratorConfig::same_architecture(const GeneratorConfig& o) const noexcept {
  return latent_dim == o.latent_dim && resolution == o.resolution && channels == o.channels &&
         max_width == o.max_width && min_width == o.min_width;
}

void DiscriminatorConfig::validate() const {
  check_resolution(resolution);
  if (channels != 1 && channels != 3) throw ConfigError("channels must be 1 or 3");
  if (base_width < 1 || max_width < base_width) throw ConfigError("invalid discriminator widths");
  if (hidden < 2) throw ConfigError("discriminator hidden width must be >= 2");
}

bool DiscriminatorConfig::same_architecture(const DiscriminatorConfig& o) const noexcept {
  return resolution == o.resolution && channels == o.channels && base_width == o.base_width &&
         max_width == o.max_width && hidden == o.hidden;
}

std::size_t discriminator_depth(std::size_t resolution) {
  check_resolution(resolution);
  // stem + two convs per downsampling level + two convs at 4x4 + three dense
  return 1 + 2 * (log2_exact(resolution) - log2_exact(kBaseResolution)) + 2 + 3;
}

// ---------------------------------------------------------------------------
// Generator

template <typename Real>
BasicGenerator<Real>::BasicGenerator(const GeneratorConfig& config)
    : config_(config), global_("global") {
  config_.validate();
  const std::size_t blocks = 1 + log2_exact(config_.resolution) - log2_exact(kBaseResolution);
  for (std::size_t b = 0; b < blocks; ++b) {
    widths_.push_back(std::max(config_.max_width >> b, config_.min_width));
  }

  std::mt19937_64 rng(config_.seed);
  const std::size_t stem_out = widths_[0] * kBaseResolution * kBaseResolution;
  auto& stem_w = global_.add("stem.weight", {stem_out, config_.latent_dim});
  fill_normal(stem_w, rng, std::sqrt(2.0 / static_cast<double>(config_.latent_dim)));
  global_.add("stem.bias", {stem_out});
  for (std::size_t b = 1; b < blocks; ++b) {
    const std::size_t in = widths_[b - 1];
    const std::size_t out = widths_[b];
    auto& w = global_.add("block" + std::to_string(b) + ".weight", {out, in, 3, 3});
    fill_normal(w, rng, std::sqrt(2.0 / static_cast<double>(in * 9)));
    global_.add("block" + std::to_string(b) + ".bias", {out});
  }
  auto& out_w = global_.add("to_image.weight", {config_.channels, widths_.back(), 3, 3});
  fill_normal(out_w, rng, std::sqrt(1.0 / static_cast<double>(widths_.back() * 9)));
  global_.add("to_image.bias", {config_.channels});
}

template <typename Real>
AdapterBank<Real>& BasicGenerator<Real>::add_task_adapters(const std::string& task_id) {
  if (task_id.empty()) throw ArgumentError("task id must not be empty");
  if (banks_.contains(task_id)) throw ConflictError("adapter bank for task '" + task_id + "' exists");
  AdapterBank<Real> bank;
  bank.task_id = task_id;
  bank.params = ParameterGroup<Real>("adapter:" + task_id);
  for (std::size_t b = 0; b < widths_.size(); ++b) {
    const std::size_t c = widths_[b];
    const std::string prefix = "block" + std::to_string(b);
    auto& scale = bank.params.add(prefix + ".scale", {c});
    std::fill(scale.value.begin(), scale.value.end(), Real(1));
    bank.params.add(prefix + ".shift", {c});
    bank.params.add(prefix + ".mix", {c, c});
  }
  task_order_.push_back(task_id);
  return banks_.emplace(task_id, std::move(bank)).first->second;
}

template <typename Real>
void BasicGenerator<Real>::set_active_task(std::optional<std::string> task_id) {
  if (task_id && !banks_.contains(*task_id)) {
    throw NotFoundError("no adapter bank for task '" + *task_id + "'");
  }
  active_ = std::move(task_id);
}

template <typename Real>
AdapterBank<Real>& BasicGenerator<Real>::bank(const std::string& task_id) {
  auto it = banks_.find(task_id);
  if (it == banks_.end()) throw NotFoundError("no adapter bank for task '" + task_id + "'");
  return it->second;
}

template <typename Real>
const AdapterBank<Real>& BasicGenerator<Real>::bank(const std::string& task_id) const {
  return const_cast<BasicGenerator*>(this)->bank(task_id);
}

template <typename Real>
const AdapterBank<Real>* BasicGenerator<Real>::active_bank() const {
  return active_ ? &banks_.at(*active_) : nullptr;
}

template <typename Real>
Tensor<Real> BasicGenerator<Real>::generate(const Tensor<Real>& z) const {
  Cache cache;
  return forward(z, cache);
}

template <typename Real>
Tensor<Real> BasicGenerator<Real>::generate(const NoiseBatch& noise) const {
  if constexpr (std::is_same_v<Real, float>) {
    return generate(noise.values);
  } else {
    return generate(tensor_cast<Real>(noise.values));
  }
}

template <typename Real>
Tensor<Real> BasicGenerator<Real>::forward(const Tensor<Real>& z, Cache& cache) const {
  const Shape4& zs = z.shape();
  if (zs.sample_size() != config_.latent_dim) {
    throw ShapeError("noise latent size " + std::to_string(zs.sample_size()) +
                     " does not match generator latent_dim " + std::to_string(config_.latent_dim));
  }
  const std::size_t n = zs.n;
  const AdapterBank<Real>* bank = active_bank();
  cache = Cache{};
  cache.z = z;
  cache.bank = bank;

  const auto& params = global_.params();
  std::size_t pi = 0;
  auto next = [&]() -> const Parameter<Real>& { return params[pi++]; };

  Tensor<Real> h;
  for (std::size_t b = 0; b < widths_.size(); ++b) {
    const auto& w = next();
    const auto& bias = next();
    if (b == 0) {
      h = nn::dense_forward<Real, Real>(z, value_span(w), value_span(bias), w.shape[0])
              .reshaped({n, widths_[0], kBaseResolution, kBaseResolution});
      cache.conv_inputs.emplace_back();
    } else {
      Tensor<Real> up = nn::upsample2x_forward(h);
      nn::ConvGeometry g{widths_[b - 1], widths_[b], 3, 1, 1, up.shape().h, up.shape().w};
      h = nn::conv2d_forward<Real, Real>(g, up, value_span(w), value_span(bias));
      cache.conv_inputs.push_back(std::move(up));
    }
    nn::leaky_relu_inplace(h, kLeakySlope);
    cache.activations.push_back(h);
    if (bank != nullptr) {
      const auto& bp = bank->params.params();
      Tensor<Real> affine;
      h = nn::adapter_forward<Real>(h, value_span(bp[3 * b]), value_span(bp[3 * b + 1]),
                                    value_span(bp[3 * b + 2]), affine);
      cache.affine.push_back(std::move(affine));
    } else {
      cache.affine.emplace_back();
    }
    cache.block_outputs.push_back(h);
  }
  const auto& w = next();
  const auto& bias = next();
  nn::ConvGeometry g{widths_.back(), config_.channels, 3, 1, 1, h.shape().h, h.shape().w};
  Tensor<Real> images = nn::conv2d_forward<Real, Real>(g, h, value_span(w), value_span(bias));
  nn::tanh_inplace(images);
  cache.images = images;
  return images;
}

template <typename Real>
void BasicGenerator<Real>::backward(const Cache& cache, const Tensor<Real>& grad_images) {
  if (grad_images.shape() != cache.images.shape()) {
    throw ShapeError("generator backward: gradient shape " + to_string(grad_images.shape()));
  }
  auto& params = global_.params();
  AdapterBank<Real>* bank = nullptr;
  if (cache.bank != nullptr) bank = &banks_.at(cache.bank->task_id);

  Tensor<Real> g = grad_images;
  nn::tanh_backward_inplace(cache.images, g);
  {
    auto& w = params[params.size() - 2];
    auto& bias = params[params.size() - 1];
    const Tensor<Real>& x = cache.block_outputs.back();
    nn::ConvGeometry geo{widths_.back(), config_.channels, 3, 1, 1, x.shape().h, x.shape().w};
    Tensor<Real> gx;
    nn::conv2d_backward<Real, Real>(geo, x, value_span(w), g, &gx, grad_span(w), grad_span(bias));
    g = std::move(gx);
  }
  for (std::size_t bi = widths_.size(); bi-- > 0;) {
    if (bank != nullptr) {
      auto& bp = bank->params.params();
      g = nn::adapter_backward<Real>(cache.activations[bi], cache.affine[bi], value_span(bp[3 * bi]),
                                     value_span(bp[3 * bi + 2]), g, grad_span(bp[3 * bi]),
                                     grad_span(bp[3 * bi + 1]), grad_span(bp[3 * bi + 2]));
    }
    nn::leaky_relu_backward_inplace(cache.activations[bi], g, kLeakySlope);
    auto& w = params[2 * bi];
    auto& bias = params[2 * bi + 1];
    if (bi == 0) {
      const Tensor<Real> g_flat = g.reshaped({g.shape().n, g.shape().sample_size(), 1, 1});
      nn::dense_backward<Real, Real>(cache.z, value_span(w), g_flat, nullptr, grad_span(w),
                                     grad_span(bias));
    } else {
      const Tensor<Real>& x = cache.conv_inputs[bi];
      nn::ConvGeometry geo{widths_[bi - 1], widths_[bi], 3, 1, 1, x.shape().h, x.shape().w};
      Tensor<Real> gx;
      nn::conv2d_backward<Real, Real>(geo, x, value_span(w), g, &gx, grad_span(w), grad_span(bias));
      g = nn::upsample2x_backward(gx);
    }
  }
}

template <typename Real>
void BasicGenerator<Real>::clone_weights_from(const BasicGenerator& source) {
  if (!config_.same_architecture(source.config_)) {
    throw ShapeError("clone_weights: generator architectures differ");
  }
  auto& dst = global_.params();
  const auto& src = source.global_.params();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i].value = src[i].value;
}

template <typename Real>
void BasicGenerator<Real>::freeze_banks_except(const std::optional<std::string>& task_id) {
  for (auto& [id, bank] : banks_) bank.params.set_trainable(task_id && id == *task_id);
}

template <typename Real>
std::vector<Parameter<Real>*> BasicGenerator<Real>::trainable_parameters() {
  std::vector<Parameter<Real>*> out;
  for (auto& p : global_.params()) {
    if (p.trainable) out.push_back(&p);
  }
  for (const auto& id : task_order_) {
    for (auto& p : banks_.at(id).params.params()) {
      if (p.trainable) out.push_back(&p);
    }
  }
  return out;
}

template <typename Real>
void BasicGenerator<Real>::zero_grad() {
  global_.zero_grad();
  for (auto& [id, bank] : banks_) bank.params.zero_grad();
}

// ---------------------------------------------------------------------------
// Discriminator

template <typename Real>
BasicDiscriminator<Real>::BasicDiscriminator(const DiscriminatorConfig& config)
    : config_(config), params_("discriminator") {
  config_.validate();
  std::mt19937_64 rng(config_.seed);

  auto add_layer = [&](Layer layer, std::size_t fan_in, std::vector<std::size_t> weight_shape,
                       std::size_t out, double gain) {
    const std::string prefix = "layer" + std::to_string(layers_.size());
    layer.weight_index = params_.params().size();
    auto& w = params_.add(prefix + ".weight", std::move(weight_shape));
    fill_normal(w, rng, std::sqrt(gain / static_cast<double>(fan_in)));
    layer.bias_index = params_.params().size();
    params_.add(prefix + ".bias", {out});
    layer_of_param_.push_back(layers_.size());
    layer_of_param_.push_back(layers_.size());
    layers_.push_back(layer);
  };
  auto add_conv = [&](std::size_t in, std::size_t out, std::size_t stride, std::size_t res) {
    Layer layer;
    layer.kind = LayerKind::conv;
    layer.conv = nn::ConvGeometry{in, out, 3, stride, 1, res, res};
    add_layer(layer, in * 9, {out, in, 3, 3}, out, 2.0);
  };
  auto add_dense = [&](std::size_t in, std::size_t out, bool activation) {
    Layer layer;
    layer.kind = LayerKind::dense;
    layer.in_features = in;
    layer.out_features = out;
    layer.activation = activation;
    add_layer(layer, in, {out, in}, out, activation ? 2.0 : 1.0);
  };

  std::size_t width = config_.base_width;
  std::size_t res = config_.resolution;
  add_conv(config_.channels, width, 1, res);
  while (res > kBaseResolution) {
    const std::size_t next = std::min(width * 2, config_.max_width);
    add_conv(width, width, 1, res);
    add_conv(width, next, 2, res);
    width = next;
    res /= 2;
  }
  add_conv(width, width, 1, res);
  add_conv(width, width, 1, res);
  add_dense(width * res * res, config_.hidden, true);
  add_dense(config_.hidden, config_.hidden / 2, true);
  add_dense(config_.hidden / 2, 1, false);

  set_trainable_suffix(layers_.size());
}

template <typename Real>
void BasicDiscriminator<Real>::set_trainable_suffix(std::size_t k) {
  if (k > layers_.size()) {
    throw RangeError("trainable suffix " + std::to_string(k) + " exceeds discriminator depth " +
                     std::to_string(layers_.size()));
  }
  trainable_suffix_ = k;
  auto& ps = params_.params();
  for (std::size_t i = 0; i < ps.size(); ++i) ps[i].trainable = layer_trainable(layer_of_param_[i]);
}

template <typename Real>
template <typename S>
Tensor<S> BasicDiscriminator<Real>::forward(const Tensor<S>& x, Cache<S>* cache) const {
  const Shape4& xs = x.shape();
  if (xs.c != config_.channels || xs.h != config_.resolution || xs.w != config_.resolution) {
    throw ShapeError("discriminator input " + to_string(xs) + " does not match resolution " +
                     std::to_string(config_.resolution));
  }
  if (cache != nullptr) *cache = Cache<S>{};
  const auto& ps = params_.params();
  Tensor<S> h = x;
  for (const Layer& layer : layers_) {
    const auto& w = ps[layer.weight_index];
    const auto& b = ps[layer.bias_index];
    if (cache != nullptr) cache->inputs.push_back(h);
    if (layer.kind == LayerKind::conv) {
      h = nn::conv2d_forward<S, Real>(layer.conv, h, value_span(w), value_span(b));
    } else {
      h = nn::dense_forward<S, Real>(h, value_span(w), value_span(b), layer.out_features);
    }
    if (layer.activation) nn::leaky_relu_inplace(h, kLeakySlope);
    if (cache != nullptr) cache->outputs.push_back(h);
  }
  return h;
}

template <typename Real>
template <typename S>
Tensor<S> BasicDiscriminator<Real>::backward(const Cache<S>& cache, const Tensor<S>& grad_logits,
                                             const std::vector<std::span<S>>& param_grads) const {
  if (cache.inputs.size() != layers_.size()) throw ArgumentError("discriminator cache is empty");
  if (!param_grads.empty() && param_grads.size() != params_.params().size()) {
    throw ArgumentError("discriminator backward: one gradient span per parameter expected");
  }
  const auto& ps = params_.params();
  auto grads_of = [&](std::size_t index) {
    return param_grads.empty() ? std::span<S>() : param_grads[index];
  };
  Tensor<S> g = grad_logits;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Layer& layer = layers_[li];
    const Tensor<S>& x = cache.inputs[li];
    if (layer.activation) nn::leaky_relu_backward_inplace(cache.outputs[li], g, kLeakySlope);
    const auto& w = ps[layer.weight_index];
    Tensor<S> gx;
    if (layer.kind == LayerKind::conv) {
      nn::conv2d_backward<S, Real>(layer.conv, x, value_span(w), g, &gx, grads_of(layer.weight_index),
                                   grads_of(layer.bias_index));
    } else {
      const Tensor<S> g_flat = g.reshaped({g.shape().n, g.shape().sample_size(), 1, 1});
      nn::dense_backward<S, Real>(x, value_span(w), g_flat, &gx, grads_of(layer.weight_index),
                                  grads_of(layer.bias_index));
    }
    g = std::move(gx);
  }
  return g;
}

template <typename Real>
std::vector<std::span<Real>> BasicDiscriminator<Real>::trainable_grad_spans() {
  std::vector<std::span<Real>> spans;
  for (auto& p : params_.params()) spans.push_back(grad_span(p));
  return spans;
}

template <typename Real>
void BasicDiscriminator<Real>::clone_weights_from(const BasicDiscriminator& source) {
  if (!config_.same_architecture(source.config_)) {
    throw ShapeError("clone_weights: discriminator architectures differ");
  }
  auto& dst = params_.params();
  const auto& src = source.params_.params();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i].value = src[i].value;
}

template <typename Real>
std::vector<Parameter<Real>*> BasicDiscriminator<Real>::trainable_parameters() {
  std::vector<Parameter<Real>*> out;
  for (auto& p : params_.params()) {
    if (p.trainable) out.push_back(&p);
  }
  return out;
}

Generator build_generator(const GeneratorConfig& config) { return Generator(config); }
Discriminator build_discriminator(const DiscriminatorConfig& config) { return Discriminator(config); }

template class ParameterGroup<float>;
template class ParameterGroup<double>;
template class BasicGenerator<float>;
template class BasicGenerator<double>;
template class BasicDiscriminator<float>;
template class BasicDiscriminator<double>;

#define CFTS_DISC_PASS(R, S)                                                                       \
  template Tensor<S> BasicDiscriminator<R>::forward<S>(const Tensor<S>&, Cache<S>*) const;         \
  template Tensor<S> BasicDiscriminator<R>::backward<S>(const Cache<S>&, const Tensor<S>&,         \
                                                        const std::vector<std::span<S>>&) const;

CFTS_DISC_PASS(float, float)
CFTS_DISC_PASS(float, Dual<float>)
CFTS_DISC_PASS(double, double)
CFTS_DISC_PASS(double, Dual<double>)

}  // namespace cfts
