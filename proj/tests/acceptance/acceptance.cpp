// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Tolerances and experiment sizes are
// fixed here; nothing is read from the environment.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cfts/checkpoint.hpp"
#include "cfts/data.hpp"
#include "cfts/error.hpp"
#include "cfts/io.hpp"
#include "cfts/logging.hpp"
#include "cfts/losses.hpp"
#include "cfts/metrics.hpp"
#include "cfts/model.hpp"
#include "cfts/toy_data.hpp"
#include "cfts/trainer.hpp"

namespace fs = std::filesystem;
using namespace cfts;

namespace {

constexpr double kGradTol = 1e-5;
constexpr double kFdStep = 1e-6;
constexpr double kKlHand = 0.5108;
constexpr double kKlTol = 1e-4;
constexpr double kFidTol = 1e-6;
constexpr double kTotalTol = 1e-6;
constexpr std::uint64_t kTrendSeeds[] = {1, 2, 3};
constexpr std::size_t kSourceImages = 5000;
constexpr std::size_t kEvalSamples = 64;
constexpr std::uint64_t kEvalSeed = 7;
const ToyShape kTrendTask = ToyShape::triangle;

struct Outcome {
  bool passed = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      passed = false;
      detail << (detail.tellp() > 0 ? "; " : "") << "failed: " << what;
    }
  }
  void note(const std::string& what) { detail << (detail.tellp() > 0 ? "; " : "") << what; }
};

int failures = 0;

void report(int id, const std::string& title, Outcome& o, double seconds) {
  if (!o.passed) ++failures;
  std::printf("[%s] criterion %d: %s (%.1fs) %s\n", o.passed ? "PASS" : "FAIL", id, title.c_str(), seconds,
              o.detail.str().c_str());
  std::fflush(stdout);
}

void run(int id, const std::string& title, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.require(false, std::string("exception: ") + e.what());
  }
  report(id, title, o, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
}

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

template <typename T>
Tensor<T> random_tensor(Shape4 shape, std::uint64_t seed, double scale = 1.0) {
  Tensor<T> t(shape);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  for (auto& v : t.values()) v = static_cast<T>(normal(rng));
  return t;
}

double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(std::max(na, nb)), 1e-300);
}

std::vector<double> fd_gradient(std::vector<double>& x, const std::function<double()>& f) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + kFdStep;
    const double up = f();
    x[i] = saved - kFdStep;
    const double down = f();
    x[i] = saved;
    g[i] = (up - down) / (2 * kFdStep);
  }
  return g;
}

DiscriminatorConfig small_discriminator() {
  DiscriminatorConfig c;
  c.resolution = 8;
  c.base_width = 4;
  c.max_width = 8;
  c.hidden = 16;
  c.seed = 5;
  return c;
}

// ---------------------------------------------------------------------------

void gradient_suite(Outcome& o) {
  const Shape4 shape{4, 1, 8, 8};

  {
    Tensor<double> target = random_tensor<double>(shape, 1);
    const auto source = similarity_distribution(random_tensor<double>(shape, 2));
    const auto analytic = cdc_loss_and_grad(target, source);
    const auto fd = fd_gradient(target.storage(), [&] { return cdc_loss(similarity_distribution(target), source); });
    const double err = relative_error(analytic.grad.storage(), fd);
    o.note("cdc " + num(err));
    o.require(err < kGradTol, "cdc gradient");
  }
  {
    const Tensor<double> teacher = random_tensor<double>(shape, 3);
    Tensor<double> student = random_tensor<double>(shape, 4);
    const auto analytic = kd_loss(teacher, student);
    const auto fd = fd_gradient(student.storage(), [&] { return kd_loss(teacher, student).value; });
    const double err = relative_error(analytic.grad.storage(), fd);
    o.note("kd " + num(err));
    o.require(err < kGradTol, "kd gradient");
  }
  {
    std::vector<double> logits = {0.3, -1.2, 2.0, 0.1};
    const auto analytic = adv_loss_g<double>(logits);
    const auto fd = fd_gradient(logits, [&] { return adv_loss_g<double>(logits).value; });
    const double err = relative_error(analytic.grad, fd);
    o.note("adv_g " + num(err));
    o.require(err < kGradTol, "adv_g gradient");
  }
  {
    BasicDiscriminator<double> d(small_discriminator());
    const Tensor<double> real = random_tensor<double>(shape, 5);
    const Tensor<double> fake = random_tensor<double>(shape, 6);
    const double gamma = 10.0;
    auto total = [&] {
      BasicDiscriminator<double> copy = d;
      const auto r1 = r1_penalty(copy, real, gamma, false);
      return adv_loss_d<double>(d.logits(real).values(), d.logits(fake).values(), r1.input_grads, gamma).total;
    };
    d.zero_grad();
    BasicDiscriminator<double>::Cache<double> rc, fc;
    const Tensor<double> rl = d.forward<double>(real, &rc);
    const Tensor<double> fl = d.forward<double>(fake, &fc);
    const auto r1 = r1_penalty(d, real, gamma, true);
    const auto loss = adv_loss_d<double>(rl.values(), fl.values(), r1.input_grads, gamma);
    const auto spans = d.trainable_grad_spans();
    d.backward<double>(rc, Tensor<double>(rl.shape(), loss.grad_real), spans);
    d.backward<double>(fc, Tensor<double>(fl.shape(), loss.grad_fake), spans);
    std::vector<double> analytic, fd;
    for (auto& p : d.params().params()) {
      const auto g = fd_gradient(p.value, total);
      fd.insert(fd.end(), g.begin(), g.end());
      analytic.insert(analytic.end(), p.grad.begin(), p.grad.end());
    }
    const double err = relative_error(analytic, fd);
    o.note("adv_d+r1 " + num(err) + " over " + std::to_string(fd.size()) + " params");
    o.require(loss.r1 > 0.0, "nonzero r1 term");
    o.require(err < kGradTol, "adv_d+r1 gradient");
  }
}

void analytic_suite(Outcome& o) {
  const auto y = similarity_distribution(random_tensor<double>({4, 1, 8, 8}, 7));
  o.require(cdc_loss(y, y) == 0.0, "KL(y||y) = 0");

  SimilarityDistribution<double> p, q;
  p.rows = q.rows = 1;
  p.cols = q.cols = 2;
  p.values = {0.5, 0.5};
  q.values = {0.9, 0.1};
  const double kl = cdc_loss(p, q);
  o.note("KL " + num(kl));
  o.require(std::abs(kl - kKlHand) <= kKlTol, "hand KL");

  const Tensor<double> s = random_tensor<double>({3, 2, 4, 4}, 8);
  Tensor<double> t = s;
  for (auto& v : t.values()) v += 0.5;
  o.require(kd_loss(s, s).value == 0.0, "MSE of identical outputs");
  o.require(std::abs(kd_loss(t, s).value - 0.25 * 32) <= 1e-12, "MSE constant offset");

  GaussianStats a{Eigen::Vector2d(0, 0), Eigen::Matrix2d::Identity()};
  GaussianStats b{Eigen::Vector2d(3, 4), Eigen::Matrix2d::Identity()};
  const double shifted = fid(a, b);
  o.note("FID shift " + num(shifted));
  o.require(std::abs(shifted - 25.0) <= kFidTol, "FID mean shift");
  Eigen::MatrixXd feats = Eigen::MatrixXd::Random(40, 6);
  const auto st = gaussian_stats(feats);
  const double same = fid(st, st);
  o.note("FID identical " + num(same));
  o.require(std::abs(same) <= kFidTol, "FID identical");
}

// ---------------------------------------------------------------------------

TrainConfig short_config(std::uint64_t seed) {
  TrainConfig c;
  c.steps_source = 20;
  c.steps_teacher = 5;
  c.steps_student = 10;
  c.probe_samples = 8;
  c.eval_samples = 16;
  c.seed = seed;
  return c;
}

TaskDataset toy_source(std::size_t n, std::uint64_t seed) {
  TaskDataset ds;
  ds.task_id = "source";
  ds.resolution = 32;
  ds.channels = 1;
  ds.images = render_source_corpus(n, 32, seed);
  return ds;
}

TaskDataset toy_task(ToyShape shape, std::uint64_t seed) {
  TaskDataset ds;
  ds.task_id = to_string(shape);
  ds.resolution = 32;
  ds.channels = 1;
  ds.images = render_toy_shape(shape, 10, 32, seed);
  return ds;
}

bool layers_equal(const Discriminator& a, const Discriminator& b, std::size_t layer) {
  const auto& l = a.layers()[layer];
  const auto& pa = a.params().params();
  const auto& pb = b.params().params();
  return pa[l.weight_index].value == pb[l.weight_index].value && pa[l.bias_index].value == pb[l.bias_index].value;
}

void isolation_suite(Outcome& o, const fs::path& work) {
  {
    Generator g(GeneratorConfig{});
    const NoiseBatch z = sample_noise(8, g.config().latent_dim, 3);
    const ImageBatch plain = g.generate(z);
    g.add_task_adapters("t");
    g.set_active_task("t");
    const ImageBatch adapted = g.generate(z);
    o.require(std::memcmp(plain.data(), adapted.data(), plain.size() * sizeof(float)) == 0,
              "zero-init adapter is the identity");
  }

  const TrainConfig cfg = short_config(21);
  const Checkpoint source = pretrain_source(toy_source(kMinSourceImages, 21), cfg).checkpoint;
  {
    const TaskDataset task = toy_task(ToyShape::ring, 1);
    const Checkpoint teacher = train_teacher(source, task, cfg).checkpoint;
    const StageResult student = train_student(source, teacher, task, cfg);
    o.require(student.losses.size() == 10, "ten optimizer steps");
    o.require(student.checkpoint.generator.global_params().same_values(source.generator.global_params()),
              "frozen global weights unchanged");
    const Discriminator& d = *student.checkpoint.discriminator;
    const std::size_t k = cfg.student_suffix();
    std::size_t frozen_ok = 0, frozen = 0;
    for (std::size_t l = 0; l + k < d.total_layers(); ++l) {
      ++frozen;
      if (layers_equal(d, *source.discriminator, l)) ++frozen_ok;
    }
    o.note("frozen D layers unchanged " + std::to_string(frozen_ok) + "/" + std::to_string(frozen));
    o.require(frozen_ok == frozen, "frozen discriminator prefix unchanged");
    o.require(!layers_equal(d, *source.discriminator, d.total_layers() - 1), "trainable suffix moved");
  }

  const std::vector<TaskDataset> tasks = {toy_task(ToyShape::triangle, 2), toy_task(ToyShape::arc, 3),
                                          toy_task(ToyShape::dots, 4)};
  {
    const fs::path run = work / "audit_run";
    save_checkpoint(source, run / "source", true);
    const SequenceReport r = run_sequence(run, tasks, cfg, true);
    bool all = r.tasks.size() == 3;
    for (const auto& t : r.tasks) all = all && t.audit.passed();
    o.note("audits after 3 tasks: " + std::to_string(r.tasks.back().audit.entries.size()) + " entries");
    o.require(all, "forgetting audit passes across 3 tasks");
  }
  {
    const fs::path run = work / "negative_run";
    save_checkpoint(source, run / "source", true);
    TrainConfig neg = cfg;
    neg.unfreeze_student_globals = true;
    bool caught = false;
    try {
      run_sequence(run, tasks, neg, true);
    } catch (const AuditError&) {
      caught = true;
    }
    o.require(caught, "negative control fails the audit");
  }
}

void wiring_suite(Outcome& o) {
  TrainConfig cfg = short_config(31);
  o.require(cfg.weights.w_t == 40.0 && cfg.weights.w_s == 20.0 && cfg.weights.alpha == 2.0, "default weights");
  const Checkpoint source = pretrain_source(toy_source(kMinSourceImages, 31), cfg).checkpoint;
  const TaskDataset task = toy_task(ToyShape::frame, 5);
  const StageResult teacher = train_teacher(source, task, cfg);
  const StageResult student = train_student(source, teacher.checkpoint, task, cfg);
  double worst_t = 0.0, worst_s = 0.0;
  for (const auto& r : teacher.losses) worst_t = std::max(worst_t, std::abs(r.total - (r.adv + 40.0 * r.cdc)));
  for (const auto& r : student.losses) {
    worst_s = std::max(worst_s, std::abs(r.total - (r.adv + 2.0 * r.kd + 20.0 * r.cdc)));
  }
  bool cdc_active = false;
  for (const auto& r : student.losses) cdc_active = cdc_active || r.cdc > 0.0;
  o.note("max |teacher total - adv - 40 cdc| " + num(worst_t) + ", max |student total - adv - 2 kd - 20 cdc| " +
         num(worst_s));
  o.require(worst_t <= kTotalTol, "teacher totals");
  o.require(worst_s <= kTotalTol, "student totals");
  o.require(cdc_active, "student cdc term is live");
}

// ---------------------------------------------------------------------------

struct TrendSample {
  double teacher_wt0 = 0.0;
  double teacher_wt40 = 0.0;
  double student_ws20 = 0.0;
  double student_ws0 = 0.0;
  double kd_alpha2 = 0.0;
  double kd_alpha0 = 0.0;
  double memorizer = 0.0;
  double train_own = 0.0;
  double memorizer_mean = 0.0;
  double train_mean = 0.0;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Paper-default schedule on one 10-shot task: teachers at w_t in {0, 40},
// students distilled from the w_t = 40 teacher at (alpha, w_s) in
// {(2, 20), (2, 0), (0, 20)}.
TrendSample trend_run(std::uint64_t seed) {
  const auto& fx = FeatureExtractor::shipped();
  TrainConfig cfg;
  cfg.seed = seed;
  const Checkpoint source = pretrain_source(toy_source(kSourceImages, 11), cfg).checkpoint;
  const TaskDataset task = toy_task(kTrendTask, 3);
  const std::uint64_t eval_seed = kEvalSeed;
  const NoiseBatch z = sample_noise(kEvalSamples, cfg.generator.latent_dim, eval_seed);

  TrendSample s;
  TrainConfig t0 = cfg;
  t0.weights.w_t = 0.0;
  const Checkpoint teacher0 = train_teacher(source, task, t0).checkpoint;
  s.teacher_wt0 = evaluate_task(teacher0.generator, task, kEvalSamples, eval_seed, fx).b_lpips;
  const Checkpoint teacher = train_teacher(source, task, cfg).checkpoint;
  s.teacher_wt40 = evaluate_task(teacher.generator, task, kEvalSamples, eval_seed, fx).b_lpips;

  auto student = [&](double alpha, double ws) {
    TrainConfig c = cfg;
    c.weights.alpha = alpha;
    c.weights.w_s = ws;
    Generator g = train_student(source, teacher, task, c).checkpoint.generator;
    g.set_active_task(task.task_id);
    return g;
  };
  const Generator s20 = student(2.0, 20.0);
  const Generator s0 = student(2.0, 0.0);
  const Generator a0 = student(0.0, 20.0);
  s.student_ws20 = evaluate_task(s20, task, kEvalSamples, eval_seed, fx).b_lpips;
  s.student_ws0 = evaluate_task(s0, task, kEvalSamples, eval_seed, fx).b_lpips;
  s.kd_alpha2 = output_distance(teacher.generator, s20, z);
  s.kd_alpha0 = output_distance(teacher.generator, a0, z);

  // Memorizer: cycles through the training images.
  std::vector<ImageBatch> cyc;
  for (std::size_t i = 0; i < kEvalSamples; ++i) cyc.push_back(task.images.slice(i % task.size(), i % task.size() + 1));
  const MetricReport mem = evaluate_images(task.task_id, concat_batch(cyc), task.images, eval_seed, fx);
  const MetricReport own = evaluate_images(task.task_id, task.images, task.images, eval_seed, fx);
  s.memorizer = mem.b_lpips;
  s.train_own = own.b_lpips;
  s.memorizer_mean = mem.mean_pairwise_lpips;
  s.train_mean = own.mean_pairwise_lpips;
  return s;
}

std::vector<TrendSample> trend_samples;

void trend_suite(Outcome& o) {
  for (std::uint64_t seed : kTrendSeeds) {
    const auto start = std::chrono::steady_clock::now();
    trend_samples.push_back(trend_run(seed));
    const auto& s = trend_samples.back();
    std::printf("  seed %llu: teacher b_lpips w_t=0 %.4f w_t=40 %.4f | student b_lpips w_s=20 %.4f w_s=0 %.4f | "
                "kd alpha=2 %.4f alpha=0 %.4f (%.0fs)\n",
                static_cast<unsigned long long>(seed), s.teacher_wt0, s.teacher_wt40, s.student_ws20, s.student_ws0,
                s.kd_alpha2, s.kd_alpha0,
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    std::fflush(stdout);
  }
  auto med = [](double TrendSample::*field) {
    std::vector<double> v;
    for (const auto& s : trend_samples) v.push_back(s.*field);
    return median(v);
  };
  const double t0 = med(&TrendSample::teacher_wt0), t40 = med(&TrendSample::teacher_wt40);
  const double s20 = med(&TrendSample::student_ws20), s0 = med(&TrendSample::student_ws0);
  o.note("median teacher " + num(t40) + " (w_t=40) vs " + num(t0) + " (w_t=0)");
  o.note("median student " + num(s20) + " (w_s=20) vs " + num(s0) + " (w_s=0)");
  o.require(t40 > t0, "teacher B-LPIPS increases with w_t");
  o.require(s20 > s0, "student B-LPIPS increases with w_s");
}

void distillation_suite(Outcome& o) {
  if (trend_samples.size() != std::size(kTrendSeeds)) {
    o.require(false, "trend runs did not complete");
    return;
  }
  std::vector<double> a2, a0;
  for (const auto& s : trend_samples) {
    a2.push_back(s.kd_alpha2);
    a0.push_back(s.kd_alpha0);
  }
  o.note("median teacher-student distance " + num(median(a2)) + " (alpha=2) vs " + num(median(a0)) + " (alpha=0)");
  o.require(median(a2) < median(a0), "distillation reduces the teacher-student distance");
}

void memorization_suite(Outcome& o) {
  if (trend_samples.size() != std::size(kTrendSeeds)) {
    o.require(false, "trend runs did not complete");
    return;
  }
  std::vector<double> students;
  for (const auto& s : trend_samples) students.push_back(s.student_ws20);
  const auto& s = trend_samples.front();
  o.note("memorizer " + num(s.memorizer) + ", training set " + num(s.train_own) + ", median student " +
         num(median(students)) + "; mean pairwise memorizer " + num(s.memorizer_mean) + " training set " +
         num(s.train_mean));
  o.require(s.memorizer <= s.train_own, "memorizer scores no higher than the training set");
  o.require(median(students) > s.train_own, "student scores strictly higher than the training set");
  for (const auto& t : trend_samples) o.require(t.student_ws20 > t.train_own, "student beats training set on every seed");
}

// ---------------------------------------------------------------------------

void reproducibility_suite(Outcome& o, const fs::path& work) {
  const TrainConfig cfg = short_config(41);
  const std::vector<TaskDataset> tasks = {toy_task(ToyShape::chevron, 6), toy_task(ToyShape::square, 7)};
  std::vector<std::string> digests[2];
  std::vector<std::vector<std::uint8_t>> metrics[2];
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path run = work / ("repro_" + std::to_string(rep));
    const StageResult src = pretrain_source(toy_source(kMinSourceImages, 41), cfg);
    save_checkpoint(src.checkpoint, run / "source", true);
    run_sequence(run, tasks, cfg, true);
    digests[rep].push_back(checkpoint_digest(run / "source"));
    for (const auto& t : tasks) {
      const fs::path dir = run / ("task_" + t.task_id);
      digests[rep].push_back(checkpoint_digest(dir / "teacher"));
      digests[rep].push_back(checkpoint_digest(dir / "student"));
      metrics[rep].push_back(read_bytes(dir / "metrics.json"));
    }
  }
  o.note(std::to_string(digests[0].size()) + " checkpoint digests, " + std::to_string(metrics[0].size()) +
         " metrics files compared");
  o.require(digests[0] == digests[1], "identical checkpoint hashes");
  o.require(metrics[0] == metrics[1], "identical metrics.json bytes");
}

}  // namespace

int main() {
  set_log_level(spdlog::level::warn);
  const fs::path work = fs::temp_directory_path() / ("cfts_acceptance_" + std::to_string(std::random_device{}()));
  fs::create_directories(work);

  run(1, "loss gradients match central differences", gradient_suite);
  run(2, "analytic loss and FID cases", analytic_suite);
  run(3, "adapter isolation, freezing and forgetting audit", [&](Outcome& o) { isolation_suite(o, work); });
  run(4, "weighted loss totals at the default weights", wiring_suite);
  run(5, "CDC diversity trend, median of 3 seeds", trend_suite);
  run(6, "distillation effect, median of 3 seeds", distillation_suite);
  run(7, "memorization detector", memorization_suite);
  run(8, "reproducible sequence runs", [&](Outcome& o) { reproducibility_suite(o, work); });

  std::error_code ec;
  fs::remove_all(work, ec);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
