// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "cfts/model.hpp"

namespace cfts {

struct AdamOptions {
  double lr = 2e-4;
  double beta1 = 0.0;
  double beta2 = 0.99;
  double eps = 1e-8;
};

/// Adam over a fixed set of parameters. State exists only for the parameters
/// handed to the constructor; a parameter that is frozen at step time is
/// skipped and left bit-unchanged.
class Adam {
 public:
  Adam(std::vector<Parameter<float>*> params, AdamOptions options);

  /// Applies one update from the accumulated grads, then zeroes them.
  void step();
  void zero_grad();

  std::size_t state_size() const noexcept { return state_.size(); }
  bool has_state_for(const Parameter<float>* p) const { return state_.contains(p); }
  std::size_t steps() const noexcept { return t_; }

 private:
  struct Moments {
    std::vector<float> m;
    std::vector<float> v;
  };

  std::vector<Parameter<float>*> params_;
  std::map<const Parameter<float>*, Moments> state_;
  AdamOptions options_;
  std::size_t t_ = 0;
};

}  // namespace cfts
