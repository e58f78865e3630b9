// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace cfts {

/// Process exit codes shared by every command-line entry point.
enum class ExitCode : int {
  ok = 0,
  usage = 2,
  data = 3,
  consistency = 4,
  io = 5,
};

/// Base of all library errors. Each subclass carries the exit code the CLI
/// reports for it.
class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

#define CFTS_DEFINE_ERROR(Name, Code)                                            \
  class Name : public Error {                                                    \
   public:                                                                       \
    explicit Name(const std::string& what) : Error(ExitCode::Code, what) {}      \
  }

// Invalid configuration values (bad resolution, unknown keys, ...).
CFTS_DEFINE_ERROR(ConfigError, usage);
// Bad function arguments: sizes, counts, mismatched shapes of plain data.
CFTS_DEFINE_ERROR(ArgumentError, usage);
// Tensor shape disagreement between a model and its input.
CFTS_DEFINE_ERROR(ShapeError, usage);
// An integer outside its admissible interval.
CFTS_DEFINE_ERROR(RangeError, usage);
// NaN or infinity where finite values are required.
CFTS_DEFINE_ERROR(NumericError, usage);
// Unreadable, empty, or inconsistent image data.
CFTS_DEFINE_ERROR(DataError, data);
// Duplicate identifiers.
CFTS_DEFINE_ERROR(ConflictError, consistency);
// Cross-artifact disagreement (architecture hash, teacher/task mismatch).
CFTS_DEFINE_ERROR(ConsistencyError, consistency);
// A forgetting audit detected a changed output for an earlier task.
CFTS_DEFINE_ERROR(AuditError, consistency);
// Lookup of a task, file or checkpoint that does not exist.
CFTS_DEFINE_ERROR(NotFoundError, io);
CFTS_DEFINE_ERROR(IoError, io);
// Corrupt or truncated serialized data.
CFTS_DEFINE_ERROR(FormatError, io);

#undef CFTS_DEFINE_ERROR

}  // namespace cfts
