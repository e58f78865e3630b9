// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0

#include "cfts/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <nlohmann/json.hpp>
#include <random>
#include <set>
#include <sstream>

#include "cfts/error.hpp"
#include "cfts/io.hpp"
#include "cfts/logging.hpp"
#include "cfts/optimizer.hpp"

namespace cfts {
namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
  if (steps_source == 0 || steps_teacher == 0 || steps_student == 0) throw ConfigError("step counts must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (cdc_batch < 2) throw ConfigError("cdc_batch must be >= 2");
  if (probe_samples == 0) throw ConfigError("probe_samples must be >= 1");
  if (eval_samples < 2) throw ConfigError("eval_samples must be >= 2");
  if (!(lr_g > 0.0) || !(lr_d > 0.0) || !std::isfinite(lr_g) || !std::isfinite(lr_d)) {
    throw ConfigError("learning rates must be positive");
  }
  weights.validate();
  generator.validate();
  discriminator.validate();
  if (generator.resolution != discriminator.resolution || generator.channels != discriminator.channels) {
    throw ConfigError("generator and discriminator disagree on resolution or channels");
  }
  const std::size_t depth = discriminator_depth(discriminator.resolution);
  if (disc_trainable_suffix_k && *disc_trainable_suffix_k > depth) {
    throw RangeError("discriminator trainable suffix " + std::to_string(*disc_trainable_suffix_k) +
                     " exceeds depth " + std::to_string(depth));
  }
}

std::size_t TrainConfig::student_suffix() const {
  return disc_trainable_suffix_k.value_or(2 * discriminator_depth(discriminator.resolution) / 3);
}

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::source: return "source";
    case Stage::teacher: return "teacher";
    case Stage::student: return "student";
  }
  return "unknown";
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

class BatchSampler {
 public:
  BatchSampler(const ImageBatch& data, std::uint64_t seed) : data_(data), rng_(seed) {}

  ImageBatch real(std::size_t n) {
    const Shape4& s = data_.shape();
    ImageBatch out({n, s.c, s.h, s.w});
    std::uniform_int_distribution<std::size_t> pick(0, s.n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      const auto src = data_.sample(pick(rng_));
      std::copy(src.begin(), src.end(), out.sample(i).begin());
    }
    return out;
  }

  NoiseBatch noise(std::size_t n, std::size_t latent_dim) { return sample_noise(n, latent_dim, rng_()); }

 private:
  const ImageBatch& data_;
  std::mt19937_64 rng_;
};

// One discriminator update on softplus losses + R1. Returns the R1 value.
double discriminator_step(Discriminator& disc, Adam& opt, const ImageBatch& real, const ImageBatch& fake,
                          double gamma) {
  Discriminator::Cache<float> real_cache;
  Discriminator::Cache<float> fake_cache;
  const Tensor<float> real_logits = disc.forward<float>(real, &real_cache);
  const Tensor<float> fake_logits = disc.forward<float>(fake, &fake_cache);
  const R1Penalty<float> r1 = r1_penalty(disc, real, static_cast<float>(gamma), true);
  const auto loss = adv_loss_d<float>(real_logits.values(), fake_logits.values(), r1.input_grads,
                                      static_cast<float>(gamma));
  const auto spans = disc.trainable_grad_spans();
  disc.backward<float>(real_cache, Tensor<float>(real_logits.shape(), loss.grad_real), spans);
  disc.backward<float>(fake_cache, Tensor<float>(fake_logits.shape(), loss.grad_fake), spans);
  opt.step();
  return loss.r1;
}

// Adds d(adv_g)/d(images) into `grad`; discriminator parameters are untouched.
double adversarial_grad(const Discriminator& disc, const Tensor<float>& images, Tensor<float>& grad) {
  Discriminator::Cache<float> cache;
  const Tensor<float> logits = disc.forward<float>(images, &cache);
  const auto loss = adv_loss_g<float>(logits.values());
  const Tensor<float> g = disc.backward<float>(cache, Tensor<float>(logits.shape(), loss.grad), {});
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
  return loss.value;
}

// CDC term against the frozen source: accumulates weight * grad into the
// generator's parameter grads and returns the unweighted loss.
double cdc_step(Generator& target, const Generator& source, const NoiseBatch& z, double weight) {
  const SimilarityDistribution<float> source_dist = similarity_distribution(source.generate(z));
  Generator::Cache cache;
  const Tensor<float> images = target.forward(z.values, cache);
  TensorLoss<float> cdc = cdc_loss_and_grad(images, source_dist);
  if (weight != 0.0) {
    for (auto& g : cdc.grad.values()) g *= static_cast<float>(weight);
    target.backward(cache, cdc.grad);
  }
  return cdc.value;
}

void require_finite(const LossReport& r, Stage stage) {
  for (double v : {r.adv, r.kd, r.cdc, r.r1, r.total}) {
    if (!std::isfinite(v)) {
      throw NumericError(to_string(stage) + " training diverged at step " + std::to_string(r.step));
    }
  }
}

void log_progress(Stage stage, const std::string& task_id, const LossReport& r, std::size_t steps) {
  if (r.step % 100 != 0 && r.step + 1 != steps) return;
  get_logger("trainer")->info("{} {} step {}/{} adv={:.4f} kd={:.4f} cdc={:.4f} r1={:.4f} total={:.4f}",
                              to_string(stage), task_id.empty() ? "-" : task_id, r.step + 1, steps, r.adv, r.kd,
                              r.cdc, r.r1, r.total);
}

const Discriminator& source_discriminator(const Checkpoint& source) {
  if (source.role != CheckpointRole::source || !source.discriminator) {
    throw ConsistencyError("expected a source checkpoint with a discriminator");
  }
  return *source.discriminator;
}

Generator clone_generator(const Generator& src) {
  Generator g = build_generator(src.config());
  g.clone_weights_from(src);
  return g;
}

Discriminator clone_discriminator(const Discriminator& src, std::size_t suffix) {
  Discriminator d = build_discriminator(src.config());
  d.clone_weights_from(src);
  d.set_trainable_suffix(suffix);
  return d;
}

}  // namespace

StageResult pretrain_source(const TaskDataset& dataset, const TrainConfig& config) {
  config.validate();
  if (dataset.size() < kMinSourceImages) {
    throw DataError("source dataset has " + std::to_string(dataset.size()) + " images, need at least " +
                    std::to_string(kMinSourceImages));
  }
  if (dataset.resolution != config.generator.resolution || dataset.channels != config.generator.channels) {
    throw DataError("source images do not match the generator resolution/channels");
  }
  const auto start = Clock::now();
  GeneratorConfig gc = config.generator;
  gc.seed = derive_seed(config.seed, "source/generator");
  DiscriminatorConfig dc = config.discriminator;
  dc.seed = derive_seed(config.seed, "source/discriminator");
  Generator gen = build_generator(gc);
  Discriminator disc = build_discriminator(dc);
  disc.set_trainable_suffix(disc.total_layers());

  Adam opt_g(gen.trainable_parameters(), {config.lr_g});
  Adam opt_d(disc.trainable_parameters(), {config.lr_d});
  BatchSampler sampler(dataset.images, derive_seed(config.seed, "source/batches"));
  const std::size_t latent = gc.latent_dim;

  StageResult result;
  for (std::size_t step = 0; step < config.steps_source; ++step) {
    LossReport r;
    r.step = step;
    const ImageBatch real = sampler.real(config.batch_size);
    const ImageBatch fake = gen.generate(sampler.noise(config.batch_size, latent));
    r.r1 = discriminator_step(disc, opt_d, real, fake, config.weights.r1_gamma);

    const NoiseBatch z = sampler.noise(config.batch_size, latent);
    Generator::Cache cache;
    const Tensor<float> images = gen.forward(z.values, cache);
    Tensor<float> grad(images.shape());
    r.adv = adversarial_grad(disc, images, grad);
    gen.backward(cache, grad);
    opt_g.step();
    r.total = r.adv;
    require_finite(r, Stage::source);
    log_progress(Stage::source, "", r, config.steps_source);
    result.losses.push_back(r);
  }

  result.checkpoint.role = CheckpointRole::source;
  result.checkpoint.generator = std::move(gen);
  result.checkpoint.discriminator = std::move(disc);
  result.checkpoint.seeds = {{"run", config.seed}};
  result.report.stage = Stage::source;
  result.report.final_loss = result.losses.back();
  result.report.wall_time_s = seconds_since(start);
  return result;
}

StageResult train_teacher(const Checkpoint& source, const TaskDataset& task, const TrainConfig& config) {
  config.validate();
  if (task.size() == 0) throw DataError("task '" + task.task_id + "' has no images");
  const auto start = Clock::now();
  const Discriminator& source_disc = source_discriminator(source);
  Generator teacher = clone_generator(source.generator);
  teacher.global_params().set_trainable(true);
  Discriminator disc = clone_discriminator(source_disc, source_disc.total_layers());

  Adam opt_g(teacher.trainable_parameters(), {config.lr_g});
  Adam opt_d(disc.trainable_parameters(), {config.lr_d});
  BatchSampler sampler(task.images, derive_seed(config.seed, "teacher/" + task.task_id));
  const std::size_t latent = teacher.config().latent_dim;
  const LossWeights& w = config.weights;

  StageResult result;
  for (std::size_t step = 0; step < config.steps_teacher; ++step) {
    LossReport r;
    r.step = step;
    const ImageBatch real = sampler.real(config.batch_size);
    const ImageBatch fake = teacher.generate(sampler.noise(config.batch_size, latent));
    r.r1 = discriminator_step(disc, opt_d, real, fake, w.r1_gamma);

    const NoiseBatch z = sampler.noise(config.batch_size, latent);
    Generator::Cache cache;
    const Tensor<float> images = teacher.forward(z.values, cache);
    Tensor<float> grad(images.shape());
    r.adv = adversarial_grad(disc, images, grad);
    teacher.backward(cache, grad);
    r.cdc = cdc_step(teacher, source.generator, sampler.noise(config.cdc_batch, latent), w.w_t);
    opt_g.step();
    r.total = teacher_total(r.adv, r.cdc, w);
    require_finite(r, Stage::teacher);
    log_progress(Stage::teacher, task.task_id, r, config.steps_teacher);
    result.losses.push_back(r);
  }

  result.checkpoint.role = CheckpointRole::teacher;
  result.checkpoint.task_id = task.task_id;
  result.checkpoint.generator = std::move(teacher);
  result.checkpoint.discriminator = std::move(disc);
  result.checkpoint.seeds = {{"run", config.seed}};
  result.report.stage = Stage::teacher;
  result.report.task_id = task.task_id;
  result.report.final_loss = result.losses.back();
  result.report.wall_time_s = seconds_since(start);
  return result;
}

StageResult train_student(const Checkpoint& source, const Checkpoint& teacher, const TaskDataset& task,
                          const TrainConfig& config, const Checkpoint* previous_student) {
  config.validate();
  if (teacher.role != CheckpointRole::teacher || teacher.task_id != task.task_id) {
    throw ConsistencyError("teacher checkpoint was trained for '" + teacher.task_id + "', not '" + task.task_id + "'");
  }
  if (task.size() == 0) throw DataError("task '" + task.task_id + "' has no images");
  const auto start = Clock::now();
  const Discriminator& source_disc = source_discriminator(source);
  if (!teacher.generator.config().same_architecture(source.generator.config())) {
    throw ConsistencyError("teacher and source generators differ in architecture");
  }

  Generator student = previous_student ? previous_student->generator : clone_generator(source.generator);
  if (!student.config().same_architecture(source.generator.config())) {
    throw ConsistencyError("previous student and source generators differ in architecture");
  }
  student.add_task_adapters(task.task_id);
  student.set_active_task(task.task_id);
  student.freeze_banks_except(task.task_id);
  student.global_params().set_trainable(config.unfreeze_student_globals);
  Discriminator disc = clone_discriminator(source_disc, config.student_suffix());

  Adam opt_g(student.trainable_parameters(), {config.lr_g});
  Adam opt_d(disc.trainable_parameters(), {config.lr_d});
  BatchSampler sampler(task.images, derive_seed(config.seed, "student/" + task.task_id));
  const std::size_t latent = student.config().latent_dim;
  const LossWeights& w = config.weights;

  StageResult result;
  for (std::size_t step = 0; step < config.steps_student; ++step) {
    LossReport r;
    r.step = step;
    const ImageBatch real = sampler.real(config.batch_size);
    const ImageBatch fake = student.generate(sampler.noise(config.batch_size, latent));
    r.r1 = discriminator_step(disc, opt_d, real, fake, w.r1_gamma);

    const NoiseBatch z = sampler.noise(config.batch_size, latent);
    Generator::Cache cache;
    const Tensor<float> images = student.forward(z.values, cache);
    TensorLoss<float> kd = kd_loss(teacher.generator.generate(z), images);
    for (auto& g : kd.grad.values()) g *= static_cast<float>(w.alpha);
    r.kd = kd.value;
    r.adv = adversarial_grad(disc, images, kd.grad);
    student.backward(cache, kd.grad);
    r.cdc = cdc_step(student, source.generator, sampler.noise(config.cdc_batch, latent), w.w_s);
    opt_g.step();
    r.total = student_total(r.adv, r.kd, r.cdc, w);
    require_finite(r, Stage::student);
    log_progress(Stage::student, task.task_id, r, config.steps_student);
    result.losses.push_back(r);
  }

  student.set_active_task(std::nullopt);
  result.checkpoint.role = CheckpointRole::student;
  result.checkpoint.task_id = task.task_id;
  result.checkpoint.generator = std::move(student);
  result.checkpoint.discriminator = std::move(disc);
  result.checkpoint.seeds = {{"run", config.seed}};
  result.report.stage = Stage::student;
  result.report.task_id = task.task_id;
  result.report.final_loss = result.losses.back();
  result.report.wall_time_s = seconds_since(start);
  return result;
}

double output_distance(const Generator& a, const Generator& b, const NoiseBatch& z) {
  return kd_loss(a.generate(z), b.generate(z)).value;
}

bool AuditReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const AuditEntry& e) { return e.passed; });
}

std::string AuditReport::to_json() const {
  json tasks = json::array();
  for (const auto& e : entries) {
    tasks.push_back({{"task_id", e.task_id},
                     {"passed", e.passed},
                     {"mismatched_values", e.mismatched},
                     {"max_abs_diff", e.max_abs_diff}});
  }
  return json{{"passed", passed()}, {"tasks", tasks}}.dump(2) + "\n";
}

fs::path probe_archive_path(const fs::path& run_dir, const std::string& task_id) {
  return run_dir / ("task_" + task_id) / "probe.bin";
}

namespace {

Tensor<float> probe_images(const Generator& student, const std::string& task_id, const NoiseBatch& probe) {
  Generator g = student;
  g.set_active_task(task_id);
  return g.generate(probe);
}

}  // namespace

void archive_probe_images(const Generator& student, const std::string& task_id, const NoiseBatch& probe,
                          const fs::path& run_dir, bool force) {
  const Tensor<float> images = probe_images(student, task_id, probe);
  const Shape4& s = images.shape();
  const RawTensor raw{{s.n, s.c, s.h, s.w}, {images.values().begin(), images.values().end()}};
  write_output(probe_archive_path(run_dir, task_id), encode_tensor_blob({raw}), force);
}

AuditReport forgetting_audit(const Generator& student, const std::vector<std::string>& tasks_done,
                             const NoiseBatch& probe, const fs::path& run_dir) {
  AuditReport report;
  for (const auto& id : tasks_done) {
    const fs::path path = probe_archive_path(run_dir, id);
    if (!fs::exists(path)) throw IoError("no probe archive for task '" + id + "' at '" + path.string() + "'");
    const auto archived = decode_tensor_blob(read_bytes(path));
    const Tensor<float> now = probe_images(student, id, probe);
    AuditEntry e;
    e.task_id = id;
    if (archived.size() != 1 || archived[0].data.size() != now.size()) {
      e.mismatched = now.size();
      e.max_abs_diff = INFINITY;
    } else {
      const auto& old = archived[0].data;
      for (std::size_t i = 0; i < now.size(); ++i) {
        if (std::memcmp(&old[i], &now[i], sizeof(float)) != 0) {
          ++e.mismatched;
          e.max_abs_diff = std::max(e.max_abs_diff, static_cast<double>(std::abs(old[i] - now[i])));
        }
      }
    }
    e.passed = e.mismatched == 0;
    report.entries.push_back(e);
  }
  return report;
}

std::string SequenceReport::to_json() const {
  json arr = json::array();
  auto loss_json = [](const LossReport& r) {
    return json{{"step", r.step}, {"adv", r.adv}, {"kd", r.kd}, {"cdc", r.cdc}, {"r1", r.r1}, {"total", r.total}};
  };
  for (const auto& t : tasks) {
    arr.push_back({{"task_id", t.student.task_id},
                   {"teacher_final", loss_json(t.teacher.final_loss)},
                   {"student_final", loss_json(t.student.final_loss)},
                   {"audit_passed", t.audit.passed()},
                   {"fid", t.metrics.fid},
                   {"b_lpips", t.metrics.b_lpips},
                   {"mean_pairwise_lpips", t.metrics.mean_pairwise_lpips},
                   {"kd_distance", t.kd_distance}});
  }
  return json{{"tasks", arr}}.dump(2) + "\n";
}

RunState load_run_state(const fs::path& run_dir) {
  RunState st;
  const fs::path path = run_dir / "run.json";
  if (!fs::exists(path)) return st;
  try {
    const json j = json::parse(read_text(path));
    st.tasks = j.at("tasks").get<std::vector<std::string>>();
    st.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw FormatError("run state '" + path.string() + "': " + e.what());
  }
  return st;
}

void save_run_state(const RunState& state, const fs::path& run_dir) {
  write_output(run_dir / "run.json", json{{"tasks", state.tasks}, {"seed", state.seed}}.dump(2) + "\n", true);
}

std::string loss_csv(const std::vector<LossReport>& losses) {
  std::string out = std::string(kLossCsvHeader) + "\n";
  for (const auto& r : losses) out += to_csv_row(r) + "\n";
  return out;
}

namespace {

NoiseBatch load_or_create_probe(const fs::path& run_dir, std::size_t n, std::size_t latent, std::uint64_t seed,
                                bool create) {
  const fs::path path = run_dir / "probe_noise.bin";
  if (fs::exists(path)) {
    const auto raw = decode_tensor_blob(read_bytes(path));
    if (raw.size() != 1 || raw[0].shape.size() != 4 || raw[0].shape[1] != latent) {
      throw FormatError("probe noise archive does not match the generator");
    }
    NoiseBatch z;
    z.seed = seed;
    z.values = Tensor<float>({raw[0].shape[0], raw[0].shape[1], 1, 1}, raw[0].data);
    return z;
  }
  if (!create) throw IoError("missing probe noise archive '" + path.string() + "'");
  NoiseBatch z = sample_noise(n, latent, seed);
  const Shape4& s = z.values.shape();
  write_output(path, encode_tensor_blob({RawTensor{{s.n, s.c, s.h, s.w}, {z.values.values().begin(), z.values.values().end()}}}),
               false);
  return z;
}

void write_samples(const Generator& student, const std::string& task_id, const NoiseBatch& probe,
                   const fs::path& dir, bool force) {
  const Tensor<float> images = probe_images(student, task_id, probe);
  char name[32];
  for (std::size_t i = 0; i < images.shape().n; ++i) {
    std::snprintf(name, sizeof(name), "%03zu.png", i);
    write_output(dir / name, encode_png(images, i), force);
  }
  write_output(dir / "grid.png", encode_grid_png(images, 8), force);
}

}  // namespace

TaskDataset load_task_images(const fs::path& run_dir, const std::string& task_id) {
  const fs::path path = run_dir / ("task_" + task_id) / "train_images.bin";
  if (!fs::exists(path)) throw IoError("no training images archived for task '" + task_id + "' in '" + run_dir.string() + "'");
  const auto raw = decode_tensor_blob(read_bytes(path));
  if (raw.size() != 1 || raw[0].shape.size() != 4) throw FormatError("malformed image archive '" + path.string() + "'");
  const auto& sh = raw[0].shape;
  TaskDataset ds;
  ds.task_id = task_id;
  ds.channels = sh[1];
  ds.resolution = sh[2];
  ds.images = ImageBatch({sh[0], sh[1], sh[2], sh[3]}, raw[0].data);
  return ds;
}

TaskOutcome train_task_in_run(const fs::path& run_dir, const TaskDataset& task, const TrainConfig& config,
                              bool force) {
  config.validate();
  RunState state = load_run_state(run_dir);
  if (state.tasks.empty()) state.seed = config.seed;
  if (std::find(state.tasks.begin(), state.tasks.end(), task.task_id) != state.tasks.end()) {
    throw ConflictError("task '" + task.task_id + "' is already trained in '" + run_dir.string() + "'");
  }
  const Checkpoint source = load_checkpoint(run_dir / "source");
  const std::size_t latent = source.generator.config().latent_dim;
  const NoiseBatch probe = load_or_create_probe(run_dir, config.probe_samples, latent,
                                                derive_seed(state.seed, "probe"), state.tasks.empty());
  std::optional<Checkpoint> previous;
  if (!state.tasks.empty()) previous = load_checkpoint(run_dir / ("task_" + state.tasks.back()) / "student");

  const fs::path task_dir = run_dir / ("task_" + task.task_id);
  const Shape4& ts = task.images.shape();
  write_output(task_dir / "train_images.bin",
               encode_tensor_blob({RawTensor{{ts.n, ts.c, ts.h, ts.w}, {task.images.values().begin(), task.images.values().end()}}}),
               force);
  auto log = get_logger("trainer");
  log->info("task {}: teacher stage ({} steps)", task.task_id, config.steps_teacher);
  StageResult teacher = train_teacher(source, task, config);
  teacher.report.checkpoint_path = task_dir / "teacher";
  save_checkpoint(teacher.checkpoint, teacher.report.checkpoint_path, force);
  write_output(task_dir / "teacher" / "losses.csv", loss_csv(teacher.losses), force);

  log->info("task {}: student stage ({} steps)", task.task_id, config.steps_student);
  StageResult student = train_student(source, teacher.checkpoint, task, config, previous ? &*previous : nullptr);
  student.report.checkpoint_path = task_dir / "student";
  save_checkpoint(student.checkpoint, student.report.checkpoint_path, force);
  write_output(task_dir / "losses.csv", loss_csv(student.losses), force);

  const Generator& gen = student.checkpoint.generator;
  archive_probe_images(gen, task.task_id, probe, run_dir, force);
  write_samples(gen, task.task_id, probe, task_dir / "samples", force);

  std::vector<std::string> done = state.tasks;
  done.push_back(task.task_id);
  TaskOutcome outcome;
  outcome.teacher = teacher.report;
  outcome.student = student.report;
  outcome.audit = forgetting_audit(gen, done, probe, run_dir);
  write_output(task_dir / "audit.json", outcome.audit.to_json(), force);
  if (!outcome.audit.passed()) {
    std::string failed;
    for (const auto& e : outcome.audit.entries) {
      if (!e.passed) failed += (failed.empty() ? "" : ", ") + e.task_id;
    }
    throw AuditError("forgetting audit failed after task '" + task.task_id + "': outputs changed for " + failed);
  }

  Generator active = gen;
  active.set_active_task(task.task_id);
  const std::uint64_t eval_seed = derive_seed(state.seed, "eval/" + task.task_id);
  outcome.metrics = evaluate_task(active, task, config.eval_samples, eval_seed, FeatureExtractor::shipped());
  write_output(task_dir / "metrics.json", outcome.metrics.to_json(), force);
  outcome.kd_distance = output_distance(teacher.checkpoint.generator, active, sample_noise(config.eval_samples, latent, eval_seed));

  state.tasks = done;
  save_run_state(state, run_dir);
  log->info("task {}: done, fid={:.3f} b_lpips={:.4f} audit passed for {} task(s)", task.task_id, outcome.metrics.fid,
            outcome.metrics.b_lpips, done.size());
  return outcome;
}

SequenceReport run_sequence(const fs::path& run_dir, const std::vector<TaskDataset>& tasks, const TrainConfig& config,
                            bool force) {
  if (tasks.empty()) throw ArgumentError("run_sequence needs at least one task");
  std::set<std::string> ids;
  for (const auto& t : tasks) {
    if (!ids.insert(t.task_id).second) throw ConflictError("duplicate task id '" + t.task_id + "'");
  }
  SequenceReport report;
  for (const auto& t : tasks) report.tasks.push_back(train_task_in_run(run_dir, t, config, force));
  write_output(run_dir / "sequence.json", report.to_json(), force);
  return report;
}

}  // namespace cfts
