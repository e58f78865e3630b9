// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cfts {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

/// Writes `bytes`, creating parent directories. An existing file with the
/// same content is left alone; different content needs `force`, otherwise
/// IoError.
void write_output(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes, bool force);
void write_output(const std::filesystem::path& path, std::string_view text, bool force);

/// Hex SHA-256 of a byte range.
std::string sha256_hex(const std::uint8_t* data, std::size_t size);
inline std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
  return sha256_hex(bytes.data(), bytes.size());
}

}  // namespace cfts
