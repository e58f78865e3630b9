// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cfts/trainer.hpp"

namespace cfts {

inline constexpr int kRunConfigSchemaVersion = 1;

/// Training configuration plus data-side settings, as stored in config.json.
struct RunConfig {
  TrainConfig train;
  std::size_t n_shots = 10;

  std::string to_json() const;
  /// Starts from `base` and applies every key of `text`. Throws ConfigError
  /// on unknown keys, a wrong schema_version or ill-typed values.
  static RunConfig merge_json(const RunConfig& base, const std::string& text);
};

/// Applies CFTS_SEED from the environment when set. Throws ConfigError when
/// it is not an unsigned integer.
void apply_env_seed(RunConfig& config);

/// Ablation grids. Rows hold the swept values followed by fid and b_lpips.
std::vector<double> wt_grid();
std::vector<std::pair<double, double>> ws_alpha_grid();  // (alpha, w_s)
std::vector<std::size_t> freeze_grid(std::size_t depth);

/// Full command-line entry point; returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cfts
