// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cfts/checkpoint.hpp"
#include "cfts/cli.hpp"
#include "cfts/error.hpp"
#include "cfts/io.hpp"
#include "test_support.hpp"

using namespace cfts;
using cfts::test::TempDir;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), {"--log-level", "warn"});
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t line_count(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

const char* kTinyConfig = R"({"schema_version": 1, "resolution": 8, "latent_dim": 8, "steps_source": 3,
  "steps_teacher": 2, "steps_student": 2, "batch_size": 4, "cdc_batch": 4, "probe_samples": 4,
  "eval_samples": 8, "seed": 5})";

// Toy corpus plus a pretrained run shared by the tests of this file.
struct Fixture {
  TempDir dir{"cli"};
  fs::path toy = dir / "toy";
  fs::path config = dir / "tiny.json";
  fs::path run = dir / "run";

  Fixture() {
    write_output(config, std::string(kTinyConfig), false);
    REQUIRE(cli({"make-toy-data", "--out", toy.string(), "--source-count", "1000", "--task-images", "12",
                 "--resolution", "8"})
                .code == 0);
    REQUIRE(cli({"pretrain", "--data", (toy / "source").string(), "--out", run.string(), "--config", config.string()})
                .code == 0);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("run config json round-trip and validation", "[cli]") {
  RunConfig base;
  const RunConfig merged = RunConfig::merge_json(base, kTinyConfig);
  CHECK(merged.train.generator.resolution == 8);
  CHECK(merged.train.discriminator.resolution == 8);
  CHECK(merged.train.seed == 5);
  const RunConfig again = RunConfig::merge_json(RunConfig{}, merged.to_json());
  CHECK(again.to_json() == merged.to_json());
  CHECK_THROWS_AS(RunConfig::merge_json(base, R"({"schema_version": 1, "bogus": 1})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::merge_json(base, R"({"schema_version": 2})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::merge_json(base, R"({"schema_version": 1, "w_t": "high"})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::merge_json(base, "{"), ConfigError);
}

TEST_CASE("environment seed", "[cli]") {
  RunConfig c;
  ::setenv("CFTS_SEED", "77", 1);
  apply_env_seed(c);
  CHECK(c.train.seed == 77);
  ::setenv("CFTS_SEED", "seven", 1);
  CHECK_THROWS_AS(apply_env_seed(c), ConfigError);
  ::unsetenv("CFTS_SEED");
  apply_env_seed(c);
  CHECK(c.train.seed == 77);
}

TEST_CASE("ablation grids have the table shapes", "[cli]") {
  CHECK(wt_grid() == std::vector<double>{10, 20, 30, 40, 50, 60, 70});
  CHECK(ws_alpha_grid().size() == 16);
  CHECK(freeze_grid(12) == std::vector<std::size_t>{2, 4, 6, 8, 10, 12});
}

TEST_CASE("usage errors exit with 2", "[cli]") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"pretrain", "--out", "x"}).code == 2);
  CHECK(cli({"ablate", "--grid", "lr", "--source", "x", "--task-dir", "y"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("pretrain writes a reproducible source checkpoint", "[cli]") {
  auto& f = fixture();
  CHECK(fs::exists(f.run / "config.json"));
  CHECK(fs::exists(f.run / "source" / "losses.csv"));
  const fs::path other = f.dir / "run_again";
  const Result r = cli({"--json", "pretrain", "--data", (f.toy / "source").string(), "--out", other.string(), "--config",
                        f.config.string()});
  REQUIRE(r.code == 0);
  const auto summary = nlohmann::json::parse(r.out);
  CHECK(summary["sha256"] == checkpoint_digest(f.run / "source"));

  // A different seed into the same directory needs --force.
  CHECK(cli({"pretrain", "--data", (f.toy / "source").string(), "--out", other.string(), "--seed", "6"}).code == 5);
  CHECK(cli({"--force", "pretrain", "--data", (f.toy / "source").string(), "--out", other.string(), "--seed", "6"})
            .code == 0);
  CHECK(checkpoint_digest(other / "source") != checkpoint_digest(f.run / "source"));
}

TEST_CASE("data and config errors map to their exit codes", "[cli]") {
  auto& f = fixture();
  CHECK(cli({"pretrain", "--data", (f.dir / "nowhere").string(), "--out", (f.dir / "r2").string(), "--config",
             f.config.string()})
            .code == 3);
  CHECK(cli({"pretrain", "--data", (f.toy / "tasks" / "arc").string(), "--out", (f.dir / "r3").string(), "--config",
             f.config.string()})
            .code == 3);
  write_output(f.dir / "bad.json", std::string(R"({"schema_version": 1, "learning_rate": 1})"), true);
  CHECK(cli({"pretrain", "--data", (f.toy / "source").string(), "--out", (f.dir / "r4").string(), "--config",
             (f.dir / "bad.json").string()})
            .code == 2);
  CHECK(cli({"train-task", "--source", f.run.string(), "--task-dir", (f.toy / "tasks" / "arc").string(), "--task-id",
             "arc", "--freeze-k", "99"})
            .code == 2);
  CHECK(cli({"sequence", "--source", f.run.string(), "--manifest", (f.dir / "none.json").string()}).code == 5);
  CHECK(cli({"generate", "--run", (f.dir / "empty_run").string(), "--task-id", "arc", "--n", "2", "--out",
             (f.dir / "g").string()})
            .code == 5);
}

TEST_CASE("train, generate and evaluate tasks", "[cli]") {
  auto& f = fixture();
  const fs::path run = f.dir / "run_tasks";
  fs::create_directories(run);
  fs::copy(f.run, run, fs::copy_options::recursive | fs::copy_options::overwrite_existing);

  const Result t = cli({"--json", "train-task", "--source", run.string(), "--task-dir",
                        (f.toy / "tasks" / "triangle").string(), "--task-id", "triangle"});
  REQUIRE(t.code == 0);
  CHECK(nlohmann::json::parse(t.out)["audit_passed"] == true);
  CHECK(load_task_images(run, "triangle").size() == 10);
  REQUIRE(cli({"train-task", "--source", run.string(), "--task-dir", (f.toy / "tasks" / "arc").string(), "--task-id",
               "arc", "--n-shots", "5"})
              .code == 0);
  CHECK(load_task_images(run, "arc").size() == 5);
  CHECK(cli({"train-task", "--source", run.string(), "--task-dir", (f.toy / "tasks" / "arc").string(), "--task-id",
             "arc"})
            .code == 4);

  const fs::path out = f.dir / "gen";
  CHECK(cli({"generate", "--run", run.string(), "--task-id", "triangle", "--n", "0", "--out", out.string()}).code == 2);
  CHECK(cli({"generate", "--run", run.string(), "--task-id", "ghost", "--n", "2", "--out", out.string()}).code == 5);
  REQUIRE(cli({"generate", "--run", run.string(), "--task-id", "triangle", "--n", "3", "--seed", "1", "--out",
               out.string()})
              .code == 0);
  CHECK(fs::exists(out / "00002.png"));
  CHECK(fs::exists(out / "grid.png"));
  // Same seed: identical bytes, so rerunning without --force succeeds.
  CHECK(cli({"generate", "--run", run.string(), "--task-id", "triangle", "--n", "3", "--seed", "1", "--out",
             out.string()})
            .code == 0);
  CHECK(cli({"generate", "--run", run.string(), "--task-id", "triangle", "--n", "3", "--seed", "2", "--out",
             out.string()})
            .code == 5);

  const std::string before = read_text(run / "task_arc" / "metrics.json");
  CHECK(cli({"eval", "--run", run.string()}).code == 2);
  const Result e = cli({"eval", "--run", run.string(), "--all"});
  REQUIRE(e.code == 0);
  const std::string summary = read_text(run / "metrics_summary.csv");
  CHECK(summary.rfind("task,fid,b_lpips\n", 0) == 0);
  CHECK(summary.find("\naverage,") != std::string::npos);
  CHECK(line_count(summary) == 4);
  CHECK(read_text(run / "task_arc" / "metrics.json") == before);
  CHECK(cli({"eval", "--run", run.string(), "--task-id", "ghost"}).code == 5);
}

TEST_CASE("ablation grids write csv tables", "[cli]") {
  auto& f = fixture();
  const std::string task = (f.toy / "tasks" / "dots").string();
  const fs::path wt = f.dir / "wt.csv";
  REQUIRE(cli({"ablate", "--grid", "wt", "--source", f.run.string(), "--task-dir", task, "--out", wt.string()}).code ==
          0);
  const std::string wt_csv = read_text(wt);
  CHECK(wt_csv.rfind("wt,fid,b_lpips\n", 0) == 0);
  CHECK(line_count(wt_csv) == 8);

  const fs::path ws = f.dir / "ws.csv";
  REQUIRE(cli({"ablate", "--grid", "ws-alpha", "--source", f.run.string(), "--task-dir", task, "--out", ws.string()})
              .code == 0);
  CHECK(read_text(ws).rfind("alpha,ws,fid,b_lpips\n", 0) == 0);
  CHECK(line_count(read_text(ws)) == 17);

  const fs::path fk = f.dir / "freeze.csv";
  REQUIRE(cli({"ablate", "--grid", "freeze", "--source", f.run.string(), "--task-dir", task, "--out", fk.string()})
              .code == 0);
  const std::string fk_csv = read_text(fk);
  CHECK(fk_csv.rfind("k,fid,b_lpips\n", 0) == 0);
  CHECK(line_count(fk_csv) == 7);
  CHECK(fk_csv.find("\n8,") != std::string::npos);
}

TEST_CASE("sequence command trains a manifest in order", "[cli]") {
  auto& f = fixture();
  const fs::path run = f.dir / "run_seq";
  fs::create_directories(run);
  fs::copy(f.run, run, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  const std::string manifest = (f.dir / "two.json").string();
  write_output(manifest,
               R"({"schema_version": 1, "tasks": [{"task_id": "frame", "path": "toy/tasks/frame", "position": 1},
                   {"task_id": "chevron", "path": "toy/tasks/chevron", "position": 0}]})",
               false);
  const Result r = cli({"--json", "sequence", "--source", run.string(), "--manifest", manifest});
  REQUIRE(r.code == 0);
  const auto report = nlohmann::json::parse(r.out);
  REQUIRE(report["tasks"].size() == 2);
  CHECK(report["tasks"][0]["task_id"] == "chevron");
  CHECK(load_run_state(run).tasks == std::vector<std::string>{"chevron", "frame"});
}
