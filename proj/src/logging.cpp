// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0

#include "cfts/logging.hpp"

#include <atomic>
#include <mutex>

#include <spdlog/sinks/stdout_sinks.h>

namespace cfts {
namespace {

std::atomic<spdlog::level::level_enum> g_level{spdlog::level::info};
std::mutex g_mutex;

}  // namespace

std::shared_ptr<spdlog::logger> get_logger(const std::string& component) {
  std::lock_guard lock(g_mutex);
  if (auto existing = spdlog::get(component)) return existing;
  auto logger = spdlog::stderr_logger_mt(component);
  logger->set_pattern("%l %Y-%m-%dT%H:%M:%S.%e %n %v");
  logger->set_level(g_level.load());
  return logger;
}

void set_log_level(spdlog::level::level_enum level) {
  g_level.store(level);
  spdlog::set_level(level);
}

}  // namespace cfts
