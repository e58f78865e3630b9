// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0
//
// Source pretraining and the per-task teacher/student pipeline.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cfts/checkpoint.hpp"
#include "cfts/data.hpp"
#include "cfts/losses.hpp"
#include "cfts/metrics.hpp"
#include "cfts/model.hpp"

namespace cfts {

inline constexpr std::size_t kMinSourceImages = 1000;

struct TrainConfig {
  std::size_t steps_source = 3000;
  std::size_t steps_teacher = 400;
  std::size_t steps_student = 400;
  std::size_t batch_size = 8;
  std::size_t cdc_batch = 8;
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  LossWeights weights;
  /// Student discriminator trainable suffix; defaults to 2L/3.
  std::optional<std::size_t> disc_trainable_suffix_k;
  std::uint64_t seed = 0;
  std::size_t probe_samples = 16;
  std::size_t eval_samples = 64;
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  /// Negative control for the forgetting audit: lets the student update its
  /// global weights. Never set in normal runs.
  bool unfreeze_student_globals = false;

  /// Throws ConfigError (RangeError for k) on invalid values.
  void validate() const;
  std::size_t student_suffix() const;
};

enum class Stage { source, teacher, student };
std::string to_string(Stage stage);

struct StageReport {
  Stage stage = Stage::source;
  std::string task_id;
  LossReport final_loss;
  double wall_time_s = 0.0;
  std::filesystem::path checkpoint_path;
};

struct StageResult {
  StageReport report;
  Checkpoint checkpoint;
  std::vector<LossReport> losses;
};

/// Throws DataError when the dataset has fewer than kMinSourceImages images.
StageResult pretrain_source(const TaskDataset& dataset, const TrainConfig& config);

/// Clones the source, trains every generator weight with adv + w_t * cdc
/// against the frozen source, with a fresh fully trainable discriminator.
StageResult train_teacher(const Checkpoint& source, const TaskDataset& task, const TrainConfig& config);

/// Adds a zero-initialized adapter bank for the task to the cumulative
/// student (or a fresh clone of the source) and trains only that bank with
/// adv + alpha * kd + w_s * cdc. Throws ConsistencyError when the teacher was
/// trained for a different task.
StageResult train_student(const Checkpoint& source, const Checkpoint& teacher, const TaskDataset& task,
                          const TrainConfig& config, const Checkpoint* previous_student = nullptr);

/// Mean per-sample squared distance between two generators on shared noise.
double output_distance(const Generator& a, const Generator& b, const NoiseBatch& z);

struct AuditEntry {
  std::string task_id;
  bool passed = false;
  std::size_t mismatched = 0;
  double max_abs_diff = 0.0;
};

struct AuditReport {
  std::vector<AuditEntry> entries;

  bool passed() const;
  std::string to_json() const;
};

/// Path of the archived probe images of a task inside a run directory.
std::filesystem::path probe_archive_path(const std::filesystem::path& run_dir, const std::string& task_id);
void archive_probe_images(const Generator& student, const std::string& task_id, const NoiseBatch& probe,
                          const std::filesystem::path& run_dir, bool force);

/// Regenerates the probe images of every task in `tasks_done` and compares
/// them bit-exactly with their archives. Throws IoError for a missing archive.
AuditReport forgetting_audit(const Generator& student, const std::vector<std::string>& tasks_done,
                             const NoiseBatch& probe, const std::filesystem::path& run_dir);

struct TaskOutcome {
  StageReport teacher;
  StageReport student;
  AuditReport audit;
  MetricReport metrics;
  double kd_distance = 0.0;
};

struct SequenceReport {
  std::vector<TaskOutcome> tasks;

  std::string to_json() const;
};

/// Run directory bookkeeping for incremental task training.
struct RunState {
  std::vector<std::string> tasks;
  std::uint64_t seed = 0;
};
RunState load_run_state(const std::filesystem::path& run_dir);
void save_run_state(const RunState& state, const std::filesystem::path& run_dir);

/// Few-shot training images archived by train_task_in_run.
TaskDataset load_task_images(const std::filesystem::path& run_dir, const std::string& task_id);

/// Trains one more task in an existing run directory (which must hold
/// `source/`): teacher, student, probe archive, audit and metrics. Throws
/// ConflictError when the task is already present and AuditError (after
/// writing audit.json) when an earlier task's outputs changed.
TaskOutcome train_task_in_run(const std::filesystem::path& run_dir, const TaskDataset& task,
                              const TrainConfig& config, bool force);

/// Runs train_task_in_run for each task in order. Throws ConflictError on
/// duplicate ids before any training starts.
SequenceReport run_sequence(const std::filesystem::path& run_dir, const std::vector<TaskDataset>& tasks,
                            const TrainConfig& config, bool force);

std::string loss_csv(const std::vector<LossReport>& losses);

}  // namespace cfts
