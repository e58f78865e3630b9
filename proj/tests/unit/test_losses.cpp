// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cfts/error.hpp"
#include "cfts/losses.hpp"
#include "test_support.hpp"

using namespace cfts;
using Catch::Approx;
using cfts::test::random_tensor;

namespace {

// Independent oracle: plain cosine on raw vectors.
double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

std::vector<double> softmax(const std::vector<double>& xs) {
  std::vector<double> out(xs.size());
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) s += out[i] = std::exp(xs[i]);
  for (auto& v : out) v /= s;
  return out;
}

// Norm-wise relative error between an analytic and a finite-difference gradient.
double relative_error(const std::vector<double>& analytic, const std::vector<double>& fd) {
  double diff2 = 0.0, a2 = 0.0, f2 = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    diff2 += (analytic[i] - fd[i]) * (analytic[i] - fd[i]);
    a2 += analytic[i] * analytic[i];
    f2 += fd[i] * fd[i];
  }
  return std::sqrt(diff2) / std::max(std::sqrt(std::max(a2, f2)), 1e-300);
}

template <typename F>
std::vector<double> central_differences(Tensor<double> x, const F& f, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

SimilarityDistribution<double> single_row(std::vector<double> p) {
  SimilarityDistribution<double> d;
  d.rows = 1;
  d.cols = p.size();
  d.values = std::move(p);
  return d;
}

Tensor<double> permute(const Tensor<double>& x, const std::vector<std::size_t>& perm) {
  Tensor<double> out(x.shape());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const auto src = x.sample(perm[i]);
    std::copy(src.begin(), src.end(), out.sample(i).begin());
  }
  return out;
}

}  // namespace

TEST_CASE("two samples give single-entry rows of probability one", "[losses][cdc]") {
  const auto d = similarity_distribution(random_tensor<double>({2, 1, 4, 4}, 1));
  REQUIRE(d.rows == 2);
  REQUIRE(d.cols == 1);
  CHECK(d.at(0, 0) == 1.0);
  CHECK(d.at(1, 0) == 1.0);
}

TEST_CASE("similarity rows match a hand cosine table", "[losses][cdc]") {
  const double r = 1.0 / std::sqrt(2.0);
  const std::vector<std::vector<double>> v = {{1, 0}, {0, 1}, {r, r}};
  Tensor<double> x({3, 2, 1, 1});
  for (std::size_t i = 0; i < 3; ++i) {
    x.at(i, 0, 0, 0) = v[i][0];
    x.at(i, 1, 0, 0) = v[i][1];
  }
  const auto d = similarity_distribution(x);
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<double> logits;
    for (std::size_t j = 0; j < 3; ++j) {
      if (j != i) logits.push_back(cosine(v[i], v[j]));
    }
    const auto expected = softmax(logits);
    for (std::size_t c = 0; c < 2; ++c) CHECK(d.at(i, c) == Approx(expected[c]).epsilon(1e-12));
  }
  // Row 0 compares (1,0) with (0,1) and (1,1)/sqrt2: cosines 0 and 1/sqrt2.
  CHECK(d.at(0, 0) == Approx(1.0 / (1.0 + std::exp(r))).epsilon(1e-12));
}

TEST_CASE("identical images give uniform rows", "[losses][cdc]") {
  Tensor<double> one = random_tensor<double>({1, 1, 4, 4}, 2);
  std::vector<Tensor<double>> copies(5, one);
  const auto d = similarity_distribution(concat_batch(copies));
  for (double p : d.values) CHECK(p == Approx(0.25).epsilon(1e-12));
}

TEST_CASE("similarity rows are distributions and zero images are guarded", "[losses][cdc]") {
  Tensor<double> x = random_tensor<double>({4, 1, 8, 8}, 3);
  for (auto& v : x.sample(2)) v = 0.0;
  const auto d = similarity_distribution(x);
  CHECK_NOTHROW(d.validate(1e-6));
  for (double p : d.values) CHECK(std::isfinite(p));
  CHECK_THROWS_AS(similarity_distribution(random_tensor<double>({1, 1, 4, 4}, 1)), ArgumentError);
}

TEST_CASE("cdc loss analytic cases", "[losses][cdc]") {
  const auto y = similarity_distribution(random_tensor<double>({4, 1, 4, 4}, 5));
  CHECK(cdc_loss(y, y) == 0.0);
  const double expected = 0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1);
  CHECK(cdc_loss(single_row({0.5, 0.5}), single_row({0.9, 0.1})) == Approx(expected).epsilon(1e-12));
  CHECK(cdc_loss(single_row({0.5, 0.5}), single_row({0.9, 0.1})) == Approx(0.5108).margin(1e-4));
  CHECK_THROWS_AS(cdc_loss(y, single_row({0.5, 0.5})), ArgumentError);
  const auto z = similarity_distribution(random_tensor<double>({4, 1, 4, 4}, 6));
  CHECK(cdc_loss(z, y) > 0.0);
}

TEST_CASE("cdc gradient matches finite differences", "[losses][cdc][grad]") {
  const Tensor<double> target = random_tensor<double>({3, 1, 8, 8}, 7);
  const auto source = similarity_distribution(random_tensor<double>({3, 1, 8, 8}, 8));
  const auto analytic = cdc_loss_and_grad(target, source);
  CHECK(analytic.value == Approx(cdc_loss(similarity_distribution(target), source)).epsilon(1e-12));
  const auto fd = central_differences(target, [&](const Tensor<double>& x) {
    return cdc_loss(similarity_distribution(x), source);
  });
  const std::vector<double> a(analytic.grad.values().begin(), analytic.grad.values().end());
  CHECK(relative_error(a, fd) < 1e-5);
}

TEST_CASE("cdc gradient in single precision", "[losses][cdc][grad]") {
  const Tensor<float> target = random_tensor<float>({4, 1, 8, 8}, 17);
  const auto source = similarity_distribution(random_tensor<float>({4, 1, 8, 8}, 18));
  const auto analytic = cdc_loss_and_grad(target, source);
  std::vector<double> fd(target.size());
  std::vector<double> a(target.size());
  Tensor<float> x = target;
  const float h = 1e-3f;
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = target[i] + h;
    const double up = cdc_loss(similarity_distribution(x), source);
    x[i] = target[i] - h;
    const double down = cdc_loss(similarity_distribution(x), source);
    x[i] = target[i];
    fd[i] = (up - down) / (2.0 * h);
    a[i] = analytic.grad[i];
  }
  // Single-precision differences are noisy; this only guards the float path.
  CHECK(relative_error(a, fd) < 5e-2);
}

TEST_CASE("kd loss closed forms and gradient", "[losses][kd]") {
  const Tensor<double> s = random_tensor<double>({3, 2, 4, 4}, 9);
  CHECK(kd_loss(s, s).value == 0.0);
  Tensor<double> t = s;
  for (auto& v : t.values()) v += 0.5;
  const double pixels = 2 * 4 * 4;
  const auto kd = kd_loss(t, s);
  CHECK(kd.value == Approx(0.25 * pixels).epsilon(1e-12));
  for (std::size_t i = 0; i < s.size(); ++i) REQUIRE(kd.grad[i] == Approx(2.0 * (s[i] - t[i]) / 3.0).epsilon(1e-12));

  const Tensor<double> teacher = random_tensor<double>({4, 1, 8, 8}, 10);
  const Tensor<double> student = random_tensor<double>({4, 1, 8, 8}, 11);
  const auto g = kd_loss(teacher, student);
  const auto fd = central_differences(student, [&](const Tensor<double>& x) { return kd_loss(teacher, x).value; });
  CHECK(relative_error({g.grad.values().begin(), g.grad.values().end()}, fd) < 1e-5);
  CHECK(kd_loss(student, teacher).value == Approx(g.value).epsilon(1e-14));
  CHECK_THROWS_AS(kd_loss(teacher, random_tensor<double>({4, 1, 4, 4}, 1)), ArgumentError);
}

TEST_CASE("generator adversarial loss limits, monotonicity and gradient", "[losses][adv]") {
  const std::vector<double> big(4, 60.0);
  CHECK(adv_loss_g<double>(big).value < 1e-20);
  const std::vector<double> a = {0.3, -1.2, 2.0, 0.1};
  const std::vector<double> b = {0.2, -1.5, 1.0, 0.0};
  CHECK(adv_loss_g<double>(a).value < adv_loss_g<double>(b).value);

  const auto g = adv_loss_g<double>(a);
  std::vector<double> fd(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto up = a, down = a;
    up[i] += 1e-6;
    down[i] -= 1e-6;
    fd[i] = (adv_loss_g<double>(up).value - adv_loss_g<double>(down).value) / 2e-6;
  }
  CHECK(relative_error(g.grad, fd) < 1e-5);
  const std::vector<double> bad = {0.0, std::numeric_limits<double>::quiet_NaN()};
  CHECK_THROWS_AS(adv_loss_g<double>(bad), NumericError);
}

TEST_CASE("discriminator adversarial loss limits", "[losses][adv]") {
  const Tensor<double> no_grad({4, 1, 2, 2});
  const std::vector<double> real(4, 60.0), fake(4, -60.0);
  const auto optimal = adv_loss_d<double>(real, fake, no_grad, 10.0);
  CHECK(optimal.total < 1e-20);

  const Tensor<double> grads = random_tensor<double>({4, 1, 2, 2}, 3);
  CHECK(adv_loss_d<double>(real, fake, grads, 0.0).r1 == 0.0);
  double sq = 0.0;
  for (double v : grads.values()) sq += v * v;
  CHECK(adv_loss_d<double>(real, fake, grads, 10.0).r1 == Approx(5.0 * sq / 4.0).epsilon(1e-12));

  const std::vector<double> inf = {std::numeric_limits<double>::infinity(), 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(adv_loss_d<double>(inf, fake, no_grad, 10.0), NumericError);
}

TEST_CASE("a constant discriminator has zero R1 penalty", "[losses][adv]") {
  BasicDiscriminator<double> d(test::tiny_discriminator());
  auto& last = d.params().params();
  // Zero the final dense weights: the logit is then the final bias.
  const auto& final_layer = d.layers().back();
  std::fill(last[final_layer.weight_index].value.begin(), last[final_layer.weight_index].value.end(), 0.0);
  last[final_layer.bias_index].value[0] = 0.7;
  const auto r1 = r1_penalty(d, random_tensor<double>({3, 1, 8, 8}, 2), 10.0, false);
  CHECK(r1.value == 0.0);
}

TEST_CASE("discriminator loss with R1 matches finite differences in its parameters", "[losses][adv][grad]") {
  BasicDiscriminator<double> d(test::tiny_discriminator());
  const Tensor<double> real = random_tensor<double>({3, 1, 8, 8}, 21);
  const Tensor<double> fake = random_tensor<double>({3, 1, 8, 8}, 22);
  const double gamma = 10.0;

  auto total = [&](const BasicDiscriminator<double>& m) {
    BasicDiscriminator<double> copy = m;
    const auto r1 = r1_penalty(copy, real, gamma, false);
    const Tensor<double> rl = m.logits(real);
    const Tensor<double> fl = m.logits(fake);
    return adv_loss_d<double>(rl.values(), fl.values(), r1.input_grads, gamma).total;
  };

  d.zero_grad();
  typename BasicDiscriminator<double>::template Cache<double> rc, fc;
  const Tensor<double> rl = d.forward<double>(real, &rc);
  const Tensor<double> fl = d.forward<double>(fake, &fc);
  const auto r1 = r1_penalty(d, real, gamma, true);
  const auto loss = adv_loss_d<double>(rl.values(), fl.values(), r1.input_grads, gamma);
  REQUIRE(loss.r1 > 0.0);
  const auto spans = d.trainable_grad_spans();
  d.backward<double>(rc, Tensor<double>(rl.shape(), loss.grad_real), spans);
  d.backward<double>(fc, Tensor<double>(fl.shape(), loss.grad_fake), spans);

  std::vector<double> analytic, fd;
  const double h = 1e-6;
  for (auto& p : d.params().params()) {
    const std::size_t stride = std::max<std::size_t>(1, p.size() / 25);
    for (std::size_t i = 0; i < p.size(); i += stride) {
      const double saved = p.value[i];
      p.value[i] = saved + h;
      const double up = total(d);
      p.value[i] = saved - h;
      const double down = total(d);
      p.value[i] = saved;
      fd.push_back((up - down) / (2 * h));
      analytic.push_back(p.grad[i]);
    }
  }
  CHECK(relative_error(analytic, fd) < 1e-5);
}

TEST_CASE("weighted totals", "[losses]") {
  LossWeights w;
  CHECK(teacher_total(1.0, 0.2, w) == Approx(9.0).epsilon(1e-15));
  CHECK(student_total(1.0, 0.1, 0.05, w) == Approx(2.2).epsilon(1e-15));
  LossWeights zero = w;
  zero.w_t = 0.0;
  zero.w_s = 0.0;
  zero.alpha = 0.0;
  CHECK(teacher_total(1.3, 0.7, zero) == 1.3);
  CHECK(student_total(1.3, 0.5, 0.7, zero) == 1.3);
  CHECK(teacher_total(1.0, 0.4, w) - teacher_total(1.0, 0.2, w) == Approx(w.w_t * 0.2));
  CHECK(student_total(1.0, 0.1, 0.05, w) >= 1.0);
  LossWeights bad = w;
  bad.alpha = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("batch permutations permute rows and leave the losses unchanged", "[losses]") {
  const Tensor<double> x = random_tensor<double>({5, 1, 4, 4}, 31);
  const Tensor<double> y = random_tensor<double>({5, 1, 4, 4}, 32);
  const std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
  const Tensor<double> px = permute(x, perm);
  const Tensor<double> py = permute(y, perm);

  const auto dx = similarity_distribution(x);
  const auto dpx = similarity_distribution(px);
  // Row i of the permuted batch is anchor perm[i]; sort both rows to compare.
  for (std::size_t i = 0; i < perm.size(); ++i) {
    std::vector<double> a(dpx.values.begin() + i * 4, dpx.values.begin() + i * 4 + 4);
    std::vector<double> b(dx.values.begin() + perm[i] * 4, dx.values.begin() + perm[i] * 4 + 4);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    for (std::size_t c = 0; c < 4; ++c) CHECK(a[c] == Approx(b[c]).epsilon(1e-12));
  }
  CHECK(cdc_loss(dpx, similarity_distribution(py)) ==
        Approx(cdc_loss(dx, similarity_distribution(y))).epsilon(1e-12));
  CHECK(kd_loss(px, py).value == Approx(kd_loss(x, y).value).epsilon(1e-12));
  const std::vector<double> logits = {0.1, -0.4, 1.2, 0.8, -2.0};
  std::vector<double> plogits(5);
  for (std::size_t i = 0; i < 5; ++i) plogits[i] = logits[perm[i]];
  CHECK(adv_loss_g<double>(plogits).value == Approx(adv_loss_g<double>(logits).value).epsilon(1e-12));
}

TEST_CASE("loss csv rows follow the header", "[losses]") {
  LossReport r{3, 1.5, 0.25, 0.125, 0.5, 2.0};
  CHECK(std::string(kLossCsvHeader) == "step,adv,kd,cdc,r1,total");
  const std::string row = to_csv_row(r);
  CHECK(row.rfind("3,", 0) == 0);
  CHECK(std::count(row.begin(), row.end(), ',') == 5);
}
