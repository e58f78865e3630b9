// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>

#include <spdlog/spdlog.h>

namespace cfts {

/// Stderr logger for a component; lines read `level ts component message`.
std::shared_ptr<spdlog::logger> get_logger(const std::string& component);

/// Applies to every component logger, existing and future.
void set_log_level(spdlog::level::level_enum level);

}  // namespace cfts
