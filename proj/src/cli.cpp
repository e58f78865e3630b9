// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0

#include "cfts/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <sstream>

#include "cfts/error.hpp"
#include "cfts/io.hpp"
#include "cfts/logging.hpp"
#include "cfts/toy_data.hpp"

namespace cfts {
namespace fs = std::filesystem;
using nlohmann::json;

std::string RunConfig::to_json() const {
  const TrainConfig& t = train;
  json j = {{"schema_version", kRunConfigSchemaVersion},
            {"seed", t.seed},
            {"steps_source", t.steps_source},
            {"steps_teacher", t.steps_teacher},
            {"steps_student", t.steps_student},
            {"batch_size", t.batch_size},
            {"cdc_batch", t.cdc_batch},
            {"lr_g", t.lr_g},
            {"lr_d", t.lr_d},
            {"w_t", t.weights.w_t},
            {"w_s", t.weights.w_s},
            {"alpha", t.weights.alpha},
            {"r1_gamma", t.weights.r1_gamma},
            {"freeze_k", t.disc_trainable_suffix_k ? json(*t.disc_trainable_suffix_k) : json(nullptr)},
            {"probe_samples", t.probe_samples},
            {"eval_samples", t.eval_samples},
            {"n_shots", n_shots},
            {"latent_dim", t.generator.latent_dim},
            {"resolution", t.generator.resolution},
            {"channels", t.generator.channels}};
  return j.dump(2) + "\n";
}

RunConfig RunConfig::merge_json(const RunConfig& base, const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (!j.contains("schema_version") || j["schema_version"] != kRunConfigSchemaVersion) {
    throw ConfigError("config schema_version must be " + std::to_string(kRunConfigSchemaVersion));
  }
  RunConfig c = base;
  TrainConfig& t = c.train;
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "schema_version") continue;
      else if (key == "seed") t.seed = v.get<std::uint64_t>();
      else if (key == "steps_source") t.steps_source = v.get<std::size_t>();
      else if (key == "steps_teacher") t.steps_teacher = v.get<std::size_t>();
      else if (key == "steps_student") t.steps_student = v.get<std::size_t>();
      else if (key == "batch_size") t.batch_size = v.get<std::size_t>();
      else if (key == "cdc_batch") t.cdc_batch = v.get<std::size_t>();
      else if (key == "lr_g") t.lr_g = v.get<double>();
      else if (key == "lr_d") t.lr_d = v.get<double>();
      else if (key == "w_t") t.weights.w_t = v.get<double>();
      else if (key == "w_s") t.weights.w_s = v.get<double>();
      else if (key == "alpha") t.weights.alpha = v.get<double>();
      else if (key == "r1_gamma") t.weights.r1_gamma = v.get<double>();
      else if (key == "freeze_k") t.disc_trainable_suffix_k = v.is_null() ? std::nullopt : std::optional(v.get<std::size_t>());
      else if (key == "probe_samples") t.probe_samples = v.get<std::size_t>();
      else if (key == "eval_samples") t.eval_samples = v.get<std::size_t>();
      else if (key == "n_shots") c.n_shots = v.get<std::size_t>();
      else if (key == "latent_dim") t.generator.latent_dim = v.get<std::size_t>();
      else if (key == "resolution") t.generator.resolution = t.discriminator.resolution = v.get<std::size_t>();
      else if (key == "channels") t.generator.channels = t.discriminator.channels = v.get<std::size_t>();
      else throw ConfigError("unknown config key '" + key + "'");
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }
  return c;
}

void apply_env_seed(RunConfig& config) {
  const char* env = std::getenv("CFTS_SEED");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0' || env[0] == '-') throw ConfigError("CFTS_SEED must be an unsigned integer");
  config.train.seed = v;
}

std::vector<double> wt_grid() { return {10, 20, 30, 40, 50, 60, 70}; }

std::vector<std::pair<double, double>> ws_alpha_grid() {
  std::vector<std::pair<double, double>> cells;
  for (double alpha : {0.0, 2.0, 5.0, 10.0}) {
    for (double ws : {10.0, 20.0, 30.0, 40.0}) cells.emplace_back(alpha, ws);
  }
  return cells;
}

std::vector<std::size_t> freeze_grid(std::size_t depth) {
  std::vector<std::size_t> ks;
  for (std::size_t i = 1; i <= 6; ++i) ks.push_back(depth * i / 6);
  return ks;
}

namespace {

// Flag values that override the config file when given.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> steps_teacher;
  std::optional<std::size_t> steps_student;
  std::optional<double> wt, ws, alpha;
  std::optional<std::size_t> freeze_k;
  std::optional<std::size_t> n_shots;
};

void add_override_flags(CLI::App* cmd, Overrides& o, bool pretrain) {
  cmd->add_option("--seed", o.seed, "Global seed");
  if (pretrain) {
    cmd->add_option("--steps", o.steps, "Source pretraining steps");
    return;
  }
  cmd->add_option("--steps-teacher", o.steps_teacher, "Teacher steps");
  cmd->add_option("--steps-student", o.steps_student, "Student steps");
  cmd->add_option("--wt", o.wt, "Teacher CDC weight");
  cmd->add_option("--ws", o.ws, "Student CDC weight");
  cmd->add_option("--alpha", o.alpha, "Distillation weight");
  cmd->add_option("--freeze-k", o.freeze_k, "Trainable discriminator suffix for the student");
  cmd->add_option("--n-shots", o.n_shots, "Images per task");
}

RunConfig resolve_config(const std::optional<fs::path>& run_dir, const std::string& config_file, const Overrides& o) {
  RunConfig c;
  if (run_dir && fs::exists(*run_dir / "config.json")) c = RunConfig::merge_json(c, read_text(*run_dir / "config.json"));
  if (!config_file.empty()) c = RunConfig::merge_json(c, read_text(config_file));
  if (o.seed) c.train.seed = *o.seed;
  if (o.steps) c.train.steps_source = *o.steps;
  if (o.steps_teacher) c.train.steps_teacher = *o.steps_teacher;
  if (o.steps_student) c.train.steps_student = *o.steps_student;
  if (o.wt) c.train.weights.w_t = *o.wt;
  if (o.ws) c.train.weights.w_s = *o.ws;
  if (o.alpha) c.train.weights.alpha = *o.alpha;
  if (o.freeze_k) c.train.disc_trainable_suffix_k = *o.freeze_k;
  if (o.n_shots) c.n_shots = *o.n_shots;
  apply_env_seed(c);
  if (c.n_shots == 0) throw ConfigError("n_shots must be >= 1");
  c.train.validate();
  return c;
}

TaskDataset load_few_shot(const fs::path& dir, const std::string& task_id, const RunConfig& c) {
  const TaskDataset all = load_task(dir, task_id, c.train.generator.resolution, c.train.generator.channels);
  if (all.size() <= c.n_shots) return all;
  return few_shot_subset(all, c.n_shots, derive_seed(c.train.seed, "shots/" + task_id));
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(9) << v;
  return s.str();
}

// The cumulative student of a run: the one saved with its last task.
Checkpoint load_latest_student(const fs::path& run_dir) {
  const RunState state = load_run_state(run_dir);
  if (state.tasks.empty()) throw IoError("run '" + run_dir.string() + "' has no trained tasks");
  return load_checkpoint(run_dir / ("task_" + state.tasks.back()) / "student");
}

struct Context {
  std::ostream& out;
  bool json_output = false;
  bool force = false;
};

int cmd_pretrain(Context& ctx, const fs::path& data, const fs::path& run, const std::string& config_file,
                 const Overrides& o) {
  const RunConfig c = resolve_config(run, config_file, o);
  const TaskDataset ds = load_task(data, "source", c.train.generator.resolution, c.train.generator.channels);
  get_logger("cli")->info("pretraining source on {} images for {} steps", ds.size(), c.train.steps_source);
  const StageResult r = pretrain_source(ds, c.train);
  write_output(run / "config.json", c.to_json(), ctx.force);
  save_checkpoint(r.checkpoint, run / "source", ctx.force);
  write_output(run / "source" / "losses.csv", loss_csv(r.losses), ctx.force);
  const std::string digest = checkpoint_digest(run / "source");
  if (ctx.json_output) {
    ctx.out << json{{"command", "pretrain"}, {"checkpoint", (run / "source").string()}, {"sha256", digest},
                    {"steps", c.train.steps_source}}
                   .dump()
            << "\n";
  } else {
    ctx.out << "source checkpoint " << (run / "source").string() << " sha256 " << digest << "\n";
  }
  return 0;
}

int cmd_train_task(Context& ctx, const fs::path& run, const fs::path& task_dir, const std::string& task_id,
                   const std::string& config_file, const Overrides& o) {
  const RunConfig c = resolve_config(run, config_file, o);
  if (!fs::exists(run / "source" / "manifest.json")) throw IoError("no source checkpoint in '" + run.string() + "'");
  const RunState state = load_run_state(run);
  if (std::find(state.tasks.begin(), state.tasks.end(), task_id) != state.tasks.end()) {
    throw ConflictError("task '" + task_id + "' is already trained in '" + run.string() + "'");
  }
  const TaskDataset ds = load_few_shot(task_dir, task_id, c);
  write_output(run / ("task_" + task_id) / "config.json", c.to_json(), ctx.force);
  const TaskOutcome t = train_task_in_run(run, ds, c.train, ctx.force);
  if (ctx.json_output) {
    ctx.out << json{{"command", "train-task"}, {"task_id", task_id}, {"audit_passed", t.audit.passed()},
                    {"fid", t.metrics.fid},    {"b_lpips", t.metrics.b_lpips}, {"kd_distance", t.kd_distance}}
                   .dump()
            << "\n";
  } else {
    ctx.out << "task " << task_id << ": audit passed for " << t.audit.entries.size() << " task(s), fid "
            << fmt(t.metrics.fid) << ", b_lpips " << fmt(t.metrics.b_lpips) << "\n";
  }
  return 0;
}

int cmd_generate(Context& ctx, const fs::path& run, const std::string& task_id, std::size_t n, std::uint64_t seed,
                 const fs::path& out_dir) {
  if (n == 0) throw ArgumentError("--n must be >= 1");
  Checkpoint ckpt = load_latest_student(run);
  if (!ckpt.generator.has_task(task_id)) throw NotFoundError("unknown task '" + task_id + "'");
  ckpt.generator.set_active_task(task_id);
  const ImageBatch images = ckpt.generator.generate(sample_noise(n, ckpt.generator.config().latent_dim, seed));
  char name[32];
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(name, sizeof(name), "%05zu.png", i);
    write_output(out_dir / name, encode_png(images, i), ctx.force);
  }
  write_output(out_dir / "grid.png", encode_grid_png(images, 8), ctx.force);
  if (ctx.json_output) {
    ctx.out << json{{"command", "generate"}, {"task_id", task_id}, {"n", n}, {"seed", seed}, {"out", out_dir.string()}}.dump()
            << "\n";
  } else {
    ctx.out << "wrote " << n << " images and grid.png to " << out_dir.string() << "\n";
  }
  return 0;
}

int cmd_eval(Context& ctx, const fs::path& run, const std::string& task_id, bool all,
             std::optional<std::size_t> n_samples) {
  const RunConfig c = resolve_config(run, "", {});
  const RunState state = load_run_state(run);
  Checkpoint ckpt = load_latest_student(run);
  std::vector<std::string> ids;
  if (all) {
    ids = state.tasks;
  } else {
    if (!ckpt.generator.has_task(task_id)) throw NotFoundError("unknown task '" + task_id + "'");
    ids = {task_id};
  }
  const std::size_t n = n_samples.value_or(c.train.eval_samples);
  std::vector<MetricReport> reports;
  for (const auto& id : ids) {
    const TaskDataset ds = load_task_images(run, id);
    ckpt.generator.set_active_task(id);
    reports.push_back(evaluate_task(ckpt.generator, ds, n, derive_seed(state.seed, "eval/" + id),
                                    FeatureExtractor::shipped()));
    write_output(run / ("task_" + id) / "metrics.json", reports.back().to_json(), ctx.force);
  }
  double fid_avg = 0.0;
  double bl_avg = 0.0;
  for (const auto& r : reports) {
    fid_avg += r.fid / static_cast<double>(reports.size());
    bl_avg += r.b_lpips / static_cast<double>(reports.size());
  }
  std::string table = "task,fid,b_lpips\n";
  for (const auto& r : reports) table += r.task_id + "," + fmt(r.fid) + "," + fmt(r.b_lpips) + "\n";
  table += "average," + fmt(fid_avg) + "," + fmt(bl_avg) + "\n";
  if (all) write_output(run / "metrics_summary.csv", table, ctx.force);
  if (ctx.json_output) {
    json arr = json::array();
    for (const auto& r : reports) arr.push_back(json::parse(r.to_json()));
    ctx.out << json{{"command", "eval"}, {"tasks", arr}, {"average", {{"fid", fid_avg}, {"b_lpips", bl_avg}}}}.dump()
            << "\n";
  } else {
    ctx.out << table;
  }
  return 0;
}

int cmd_ablate(Context& ctx, const std::string& grid, const fs::path& run, const fs::path& task_dir,
               std::string task_id, const fs::path& out_csv, const std::string& config_file, const Overrides& o) {
  if (grid != "wt" && grid != "ws-alpha" && grid != "freeze") throw ArgumentError("unknown grid '" + grid + "'");
  if (task_id.empty()) task_id = task_dir.filename().string();
  const RunConfig c = resolve_config(run, config_file, o);
  const Checkpoint source = load_checkpoint(run / "source");
  const TaskDataset ds = load_few_shot(task_dir, task_id, c);
  const std::uint64_t eval_seed = derive_seed(c.train.seed, "eval/" + task_id);
  const auto& fx = FeatureExtractor::shipped();
  auto log = get_logger("cli");

  auto evaluate_student = [&](const Checkpoint& student) {
    Generator g = student.generator;
    g.set_active_task(task_id);
    return evaluate_task(g, ds, c.train.eval_samples, eval_seed, fx);
  };

  std::string csv;
  if (grid == "wt") {
    csv = "wt,fid,b_lpips\n";
    for (double wt : wt_grid()) {
      TrainConfig t = c.train;
      t.weights.w_t = wt;
      log->info("ablate wt={}", wt);
      const StageResult teacher = train_teacher(source, ds, t);
      const MetricReport m = evaluate_task(teacher.checkpoint.generator, ds, t.eval_samples, eval_seed, fx);
      csv += fmt(wt) + "," + fmt(m.fid) + "," + fmt(m.b_lpips) + "\n";
    }
  } else {
    const StageResult teacher = train_teacher(source, ds, c.train);
    if (grid == "ws-alpha") {
      csv = "alpha,ws,fid,b_lpips\n";
      for (const auto& [alpha, ws] : ws_alpha_grid()) {
        TrainConfig t = c.train;
        t.weights.alpha = alpha;
        t.weights.w_s = ws;
        log->info("ablate alpha={} ws={}", alpha, ws);
        const MetricReport m = evaluate_student(train_student(source, teacher.checkpoint, ds, t).checkpoint);
        csv += fmt(alpha) + "," + fmt(ws) + "," + fmt(m.fid) + "," + fmt(m.b_lpips) + "\n";
      }
    } else {
      csv = "k,fid,b_lpips\n";
      for (std::size_t k : freeze_grid(source.discriminator->total_layers())) {
        TrainConfig t = c.train;
        t.disc_trainable_suffix_k = k;
        log->info("ablate k={}", k);
        const MetricReport m = evaluate_student(train_student(source, teacher.checkpoint, ds, t).checkpoint);
        csv += std::to_string(k) + "," + fmt(m.fid) + "," + fmt(m.b_lpips) + "\n";
      }
    }
  }
  const fs::path target = out_csv.empty() ? run / ("ablate_" + grid + ".csv") : out_csv;
  write_output(target, csv, ctx.force);
  if (ctx.json_output) {
    ctx.out << json{{"command", "ablate"}, {"grid", grid}, {"csv", target.string()}}.dump() << "\n";
  } else {
    ctx.out << csv;
  }
  return 0;
}

int cmd_sequence(Context& ctx, const fs::path& run, const fs::path& manifest, const std::string& config_file,
                 const Overrides& o) {
  const RunConfig c = resolve_config(run, config_file, o);
  const TaskRegistry registry = load_task_manifest(manifest);
  if (registry.size() == 0) throw ArgumentError("task manifest lists no tasks");
  std::vector<TaskDataset> tasks;
  for (const auto& spec : registry.tasks()) {
    RunConfig per_task = c;
    per_task.n_shots = spec.n_shots;
    tasks.push_back(load_few_shot(spec.image_dir, spec.task_id, per_task));
  }
  const SequenceReport report = run_sequence(run, tasks, c.train, ctx.force);
  ctx.out << (ctx.json_output ? json::parse(report.to_json()).dump() + "\n" : report.to_json());
  return 0;
}

int cmd_make_toy_data(Context& ctx, const fs::path& out_dir, const ToyCorpusOptions& options) {
  const fs::path manifest = write_toy_corpus(out_dir, options);
  if (ctx.json_output) {
    ctx.out << json{{"command", "make-toy-data"}, {"manifest", manifest.string()}}.dump() << "\n";
  } else {
    ctx.out << "wrote toy corpus to " << out_dir.string() << " (manifest " << manifest.string() << ")\n";
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Continual few-shot teacher-student GAN training"};
  app.require_subcommand(1);
  Context ctx{out};
  std::string log_level = "info";
  app.add_flag("--json", ctx.json_output, "Machine-readable summary on stdout");
  app.add_flag("--force", ctx.force, "Overwrite existing outputs that differ");
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

  std::string config_file;
  fs::path data, run, task_dir, out_dir, manifest, out_csv;
  std::string task_id, grid;
  Overrides o;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  bool all = false;
  std::optional<std::size_t> n_samples;
  ToyCorpusOptions toy;

  auto* pretrain = app.add_subcommand("pretrain", "Pretrain the source generator and discriminator");
  pretrain->add_option("--data", data, "Directory of source images")->required();
  pretrain->add_option("--out", run, "Run directory")->required();
  pretrain->add_option("--config", config_file, "JSON config file");
  add_override_flags(pretrain, o, true);

  auto* train = app.add_subcommand("train-task", "Train teacher and student for one task");
  train->add_option("--source", run, "Run directory holding source/")->required();
  train->add_option("--task-dir", task_dir, "Directory of task images")->required();
  train->add_option("--task-id", task_id, "Task identifier")->required();
  train->add_option("--config", config_file, "JSON config file");
  add_override_flags(train, o, false);

  auto* gen = app.add_subcommand("generate", "Sample images from a trained task");
  gen->add_option("--run", run, "Run directory")->required();
  gen->add_option("--task-id", task_id, "Task identifier")->required();
  gen->add_option("--n", n, "Number of images")->required();
  gen->add_option("--seed", seed, "Noise seed");
  gen->add_option("--out", out_dir, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "FID and B-LPIPS per task");
  eval->add_option("--run", run, "Run directory")->required();
  auto* eval_task = eval->add_option("--task-id", task_id, "Task identifier");
  auto* eval_all = eval->add_flag("--all", all, "Evaluate every task");
  eval_task->excludes(eval_all);
  eval->add_option("--n-samples", n_samples, "Generated images per task");

  auto* ablate = app.add_subcommand("ablate", "Sweep an ablation grid on one task");
  ablate->add_option("--grid", grid, "wt | ws-alpha | freeze")->required()->check(CLI::IsMember({"wt", "ws-alpha", "freeze"}));
  ablate->add_option("--source", run, "Run directory holding source/")->required();
  ablate->add_option("--task-dir", task_dir, "Directory of task images")->required();
  ablate->add_option("--task-id", task_id, "Task identifier (default: directory name)");
  ablate->add_option("--out", out_csv, "CSV path (default: RUN/ablate_<grid>.csv)");
  ablate->add_option("--config", config_file, "JSON config file");
  add_override_flags(ablate, o, false);

  auto* seq = app.add_subcommand("sequence", "Train every task of a manifest in order");
  seq->add_option("--source", run, "Run directory holding source/")->required();
  seq->add_option("--manifest", manifest, "Task manifest JSON")->required();
  seq->add_option("--config", config_file, "JSON config file");
  add_override_flags(seq, o, false);

  auto* toy_cmd = app.add_subcommand("make-toy-data", "Render the synthetic shape corpus");
  toy_cmd->add_option("--out", out_dir, "Output directory")->required();
  toy_cmd->add_option("--source-count", toy.source_count, "Source images");
  toy_cmd->add_option("--task-images", toy.task_images, "Images per task");
  toy_cmd->add_option("--resolution", toy.resolution, "Image side length");
  toy_cmd->add_option("--seed", toy.seed, "Render seed");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::usage);
  }

  try {
    set_log_level(spdlog::level::from_str(log_level));
    if (*pretrain) return cmd_pretrain(ctx, data, run, config_file, o);
    if (*train) return cmd_train_task(ctx, run, task_dir, task_id, config_file, o);
    if (*gen) return cmd_generate(ctx, run, task_id, n, seed, out_dir);
    if (*eval) {
      if (!all && task_id.empty()) throw ArgumentError("eval needs --task-id or --all");
      return cmd_eval(ctx, run, task_id, all, n_samples);
    }
    if (*ablate) return cmd_ablate(ctx, grid, run, task_dir, task_id, out_csv, config_file, o);
    if (*seq) return cmd_sequence(ctx, run, manifest, config_file, o);
    if (*toy_cmd) return cmd_make_toy_data(ctx, out_dir, toy);
  } catch (const Error& e) {
    get_logger("cli")->error("{}", e.what());
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const fs::filesystem_error& e) {
    get_logger("cli")->error("{}", e.what());
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::io);
  }
  return static_cast<int>(ExitCode::usage);
}

}  // namespace cfts
