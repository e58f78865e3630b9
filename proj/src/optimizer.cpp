// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0

#include "cfts/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "cfts/error.hpp"

namespace cfts {

Adam::Adam(std::vector<Parameter<float>*> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  if (!(options_.lr > 0.0)) throw ConfigError("learning rate must be positive");
  for (auto* p : params_) {
    if (!p->trainable) throw ArgumentError("Adam: parameter '" + p->name + "' is frozen");
    state_[p] = Moments{std::vector<float>(p->size(), 0.0f), std::vector<float>(p->size(), 0.0f)};
  }
}

void Adam::step() {
  ++t_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const auto step_size = static_cast<float>(options_.lr / correction1);
  const auto inv_sqrt_c2 = static_cast<float>(1.0 / std::sqrt(correction2));
  const auto eps = static_cast<float>(options_.eps);
  const auto fb1 = static_cast<float>(b1);
  const auto fb2 = static_cast<float>(b2);
  for (auto* p : params_) {
    if (!p->trainable) continue;
    auto& s = state_.at(p);
    for (std::size_t i = 0; i < p->size(); ++i) {
      const float g = p->grad[i];
      s.m[i] = fb1 * s.m[i] + (1.0f - fb1) * g;
      s.v[i] = fb2 * s.v[i] + (1.0f - fb2) * g * g;
      p->value[i] -= step_size * s.m[i] / (std::sqrt(s.v[i]) * inv_sqrt_c2 + eps);
    }
  }
  zero_grad();
}

void Adam::zero_grad() {
  for (auto* p : params_) std::fill(p->grad.begin(), p->grad.end(), 0.0f);
}

}  // namespace cfts
