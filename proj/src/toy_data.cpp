// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0

#include "cfts/toy_data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

#include "cfts/data.hpp"
#include "cfts/error.hpp"
#include "cfts/io.hpp"

namespace cfts {
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
  double x, y;
};

Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double length(Vec2 a) { return std::sqrt(dot(a, a)); }

double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 pa = p - a;
  const Vec2 ba = b - a;
  const double h = std::clamp(dot(pa, ba) / dot(ba, ba), 0.0, 1.0);
  return length({pa.x - ba.x * h, pa.y - ba.y * h});
}

double box_sdf(Vec2 p, double hx, double hy) {
  const double dx = std::abs(p.x) - hx;
  const double dy = std::abs(p.y) - hy;
  return length({std::max(dx, 0.0), std::max(dy, 0.0)}) + std::min(std::max(dx, dy), 0.0);
}

// Signed distance of a convex polygon (counter-clockwise vertices).
double polygon_sdf(Vec2 p, const std::array<Vec2, 3>& v) {
  double d = 1e30;
  bool inside = true;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2 a = v[i];
    const Vec2 b = v[(i + 1) % v.size()];
    d = std::min(d, segment_distance(p, a, b));
    const Vec2 e = b - a;
    const Vec2 w = p - a;
    if (e.x * w.y - e.y * w.x < 0.0) inside = false;
  }
  return inside ? -d : d;
}

struct Instance {
  Vec2 center;
  double size;
  double angle;
  double thickness;
  double intensity;
  double aspect;
  std::array<Vec2, 3> dots;
};

Instance draw_instance(std::mt19937_64& rng, double res) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Instance in{};
  in.center = {res * (0.4 + 0.2 * u(rng)), res * (0.4 + 0.2 * u(rng))};
  in.size = res * (0.2 + 0.12 * u(rng));
  in.angle = kPi * u(rng);
  in.thickness = 1.5 + 1.5 * u(rng) * res / 32.0;
  in.intensity = 0.6 + 0.4 * u(rng);
  in.aspect = 0.5 + 0.4 * u(rng);
  for (auto& d : in.dots) {
    const double r = in.size * (0.3 + 0.7 * u(rng));
    const double a = 2.0 * kPi * u(rng);
    d = {r * std::cos(a), r * std::sin(a)};
  }
  return in;
}

// Distance in the instance frame (p already centered and rotated).
double shape_sdf(ToyShape shape, Vec2 p, const Instance& in) {
  const double s = in.size;
  const double t = in.thickness;
  switch (shape) {
    case ToyShape::ellipse: {
      const double a = s;
      const double b = s * in.aspect;
      return (length({p.x / a, p.y / b}) - 1.0) * std::min(a, b);
    }
    case ToyShape::ring:
      return std::abs(length(p) - s) - 0.5 * t;
    case ToyShape::bar:
      return segment_distance(p, {-s, 0.0}, {s, 0.0}) - 0.5 * t;
    case ToyShape::cross:
      return std::min(segment_distance(p, {-s, 0.0}, {s, 0.0}), segment_distance(p, {0.0, -s}, {0.0, s})) -
             0.5 * t;
    case ToyShape::square:
      return box_sdf(p, 0.75 * s, 0.75 * s);
    case ToyShape::triangle: {
      const std::array<Vec2, 3> v{Vec2{s * std::cos(-kPi / 2), s * std::sin(-kPi / 2)},
                                  Vec2{s * std::cos(-kPi / 2 + 2 * kPi / 3), s * std::sin(-kPi / 2 + 2 * kPi / 3)},
                                  Vec2{s * std::cos(-kPi / 2 + 4 * kPi / 3), s * std::sin(-kPi / 2 + 4 * kPi / 3)}};
      return polygon_sdf(p, v);
    }
    case ToyShape::arc: {
      // Upper half circle with round caps.
      if (p.y <= 0.0) return std::abs(length(p) - s) - 0.5 * t;
      return std::min(length(p - Vec2{s, 0.0}), length(p - Vec2{-s, 0.0})) - 0.5 * t;
    }
    case ToyShape::dots: {
      double d = 1e30;
      for (const auto& c : in.dots) d = std::min(d, length(p - c) - (0.8 * t + 0.6));
      return d;
    }
    case ToyShape::frame:
      return std::abs(box_sdf(p, 0.8 * s, 0.8 * s * in.aspect + 0.2 * s)) - 0.5 * t;
    case ToyShape::chevron:
      return std::min(segment_distance(p, {-s, -0.6 * s}, {0.0, 0.6 * s}),
                      segment_distance(p, {0.0, 0.6 * s}, {s, -0.6 * s})) -
             0.5 * t;
  }
  return 1e30;
}

void render_into(ImageBatch& out, std::size_t index, ToyShape shape, const Instance& in) {
  const std::size_t res = out.shape().h;
  const double c = std::cos(in.angle);
  const double sn = std::sin(in.angle);
  for (std::size_t y = 0; y < res; ++y) {
    for (std::size_t x = 0; x < res; ++x) {
      const Vec2 q{x + 0.5 - in.center.x, y + 0.5 - in.center.y};
      const Vec2 p{c * q.x + sn * q.y, -sn * q.x + c * q.y};
      const double coverage = std::clamp(0.5 - shape_sdf(shape, p, in), 0.0, 1.0);
      out.at(index, 0, y, x) = static_cast<float>(2.0 * coverage * in.intensity - 1.0);
    }
  }
}

}  // namespace

const std::vector<ToyShape>& source_shapes() {
  static const std::vector<ToyShape> shapes{ToyShape::ellipse, ToyShape::ring, ToyShape::bar, ToyShape::cross,
                                            ToyShape::square};
  return shapes;
}

const std::vector<ToyShape>& task_shapes() {
  static const std::vector<ToyShape> shapes{ToyShape::triangle, ToyShape::arc, ToyShape::dots, ToyShape::frame,
                                            ToyShape::chevron};
  return shapes;
}

std::string to_string(ToyShape shape) {
  switch (shape) {
    case ToyShape::ellipse: return "ellipse";
    case ToyShape::ring: return "ring";
    case ToyShape::bar: return "bar";
    case ToyShape::cross: return "cross";
    case ToyShape::square: return "square";
    case ToyShape::triangle: return "triangle";
    case ToyShape::arc: return "arc";
    case ToyShape::dots: return "dots";
    case ToyShape::frame: return "frame";
    case ToyShape::chevron: return "chevron";
  }
  return "unknown";
}

ToyShape parse_toy_shape(const std::string& name) {
  for (const auto* list : {&source_shapes(), &task_shapes()}) {
    for (ToyShape s : *list) {
      if (to_string(s) == name) return s;
    }
  }
  throw ArgumentError("unknown toy shape '" + name + "'");
}

ImageBatch render_toy_shape(ToyShape shape, std::size_t count, std::size_t resolution, std::uint64_t seed) {
  if (resolution < 8) throw ArgumentError("toy resolution must be >= 8");
  ImageBatch out({count, 1, resolution, resolution});
  std::mt19937_64 rng(derive_seed(seed, to_string(shape)));
  for (std::size_t i = 0; i < count; ++i) {
    render_into(out, i, shape, draw_instance(rng, static_cast<double>(resolution)));
  }
  return out;
}

ImageBatch render_source_corpus(std::size_t count, std::size_t resolution, std::uint64_t seed) {
  if (resolution < 8) throw ArgumentError("toy resolution must be >= 8");
  ImageBatch out({count, 1, resolution, resolution});
  const auto& shapes = source_shapes();
  std::vector<std::mt19937_64> rngs;
  for (ToyShape s : shapes) rngs.emplace_back(derive_seed(seed, "source/" + to_string(s)));
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t k = i % shapes.size();
    render_into(out, i, shapes[k], draw_instance(rngs[k], static_cast<double>(resolution)));
  }
  return out;
}

fs::path write_toy_corpus(const fs::path& out_dir, const ToyCorpusOptions& options) {
  if (options.source_count == 0 || options.task_images == 0) throw ArgumentError("toy corpus sizes must be >= 1");
  char name[32];
  const ImageBatch source = render_source_corpus(options.source_count, options.resolution, options.seed);
  for (std::size_t i = 0; i < source.shape().n; ++i) {
    std::snprintf(name, sizeof(name), "%06zu.png", i);
    write_output(out_dir / "source" / name, encode_png(source, i), true);
  }
  TaskRegistry registry;
  for (ToyShape s : task_shapes()) {
    const std::string id = to_string(s);
    const ImageBatch imgs = render_toy_shape(s, options.task_images, options.resolution, options.seed);
    for (std::size_t i = 0; i < imgs.shape().n; ++i) {
      std::snprintf(name, sizeof(name), "%03zu.png", i);
      write_output(out_dir / "tasks" / id / name, encode_png(imgs, i), true);
    }
    registry.add({id, fs::path("tasks") / id, options.task_images, registry.size()});
  }
  const fs::path manifest = out_dir / "tasks.json";
  save_task_manifest(registry, manifest);
  return manifest;
}

}  // namespace cfts
