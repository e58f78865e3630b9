// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0

#include "cfts/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <random>

#include "cfts/error.hpp"

namespace cfts {
namespace fs = std::filesystem;

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

// Decoded image as float [0, 1] in RGB or gray order, with the native channel count.
cv::Mat decode(const fs::path& file, int& native_channels) {
  cv::Mat raw = cv::imread(file.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw DataError("cannot decode image '" + file.filename().string() + "'");
  native_channels = raw.channels();
  double scale = 1.0 / 255.0;
  if (raw.depth() == CV_16U) scale = 1.0 / 65535.0;
  else if (raw.depth() != CV_8U) {
    throw DataError("unsupported pixel depth in '" + file.filename().string() + "'");
  }
  cv::Mat converted;
  switch (raw.channels()) {
    case 1: converted = raw; break;
    case 3: cv::cvtColor(raw, converted, cv::COLOR_BGR2RGB); break;
    case 4: cv::cvtColor(raw, converted, cv::COLOR_BGRA2RGB); break;
    default:
      throw DataError("unsupported channel count in '" + file.filename().string() + "'");
  }
  cv::Mat out;
  converted.convertTo(out, CV_32F, scale);
  return out;
}

cv::Mat to_channels(const cv::Mat& img, std::size_t channels) {
  if (static_cast<std::size_t>(img.channels()) == channels) return img;
  cv::Mat out;
  if (channels == 1) cv::cvtColor(img, out, cv::COLOR_RGB2GRAY);
  else cv::cvtColor(img, out, cv::COLOR_GRAY2RGB);
  return out;
}

cv::Mat crop_and_resize(const cv::Mat& img, std::size_t resolution) {
  const int side = std::min(img.rows, img.cols);
  const cv::Rect roi((img.cols - side) / 2, (img.rows - side) / 2, side, side);
  cv::Mat square = img(roi);
  const int res = static_cast<int>(resolution);
  if (side == res) return square.clone();
  cv::Mat out;
  cv::resize(square, out, cv::Size(res, res), 0, 0, side > res ? cv::INTER_AREA : cv::INTER_LINEAR);
  return out;
}

cv::Mat to_mat_u8(const ImageBatch& images, std::size_t index) {
  const Shape4& s = images.shape();
  const int type = s.c == 1 ? CV_8UC1 : CV_8UC3;
  cv::Mat m(static_cast<int>(s.h), static_cast<int>(s.w), type);
  for (std::size_t y = 0; y < s.h; ++y) {
    auto* row = m.ptr<std::uint8_t>(static_cast<int>(y));
    for (std::size_t x = 0; x < s.w; ++x) {
      if (s.c == 1) {
        row[x] = to_u8(images.at(index, 0, y, x));
      } else {
        // OpenCV stores BGR.
        for (std::size_t c = 0; c < 3; ++c) row[3 * x + (2 - c)] = to_u8(images.at(index, c, y, x));
      }
    }
  }
  return m;
}

std::vector<std::uint8_t> encode(const cv::Mat& m) {
  std::vector<std::uint8_t> bytes;
  if (!cv::imencode(".png", m, bytes)) throw IoError("PNG encoding failed");
  return bytes;
}

}  // namespace

void TaskRegistry::add(TaskSpec spec) {
  if (spec.task_id.empty()) throw ArgumentError("task id must not be empty");
  if (spec.n_shots == 0) throw ArgumentError("task '" + spec.task_id + "': n_shots must be >= 1");
  if (contains(spec.task_id)) throw ConflictError("duplicate task id '" + spec.task_id + "'");
  tasks_.push_back(std::move(spec));
}

const TaskSpec& TaskRegistry::find(std::string_view task_id) const {
  for (const auto& t : tasks_) {
    if (t.task_id == task_id) return t;
  }
  throw NotFoundError("unknown task '" + std::string(task_id) + "'");
}

bool TaskRegistry::contains(std::string_view task_id) const {
  return std::any_of(tasks_.begin(), tasks_.end(), [&](const TaskSpec& t) { return t.task_id == task_id; });
}

TaskRegistry load_task_manifest(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open task manifest '" + manifest.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("task manifest '" + manifest.string() + "': " + e.what());
  }
  if (j.value("schema_version", 0) != 1) throw FormatError("task manifest: unsupported schema_version");
  if (!j.contains("tasks") || !j["tasks"].is_array()) throw FormatError("task manifest: missing tasks");
  const fs::path base = manifest.parent_path();
  std::vector<TaskSpec> specs;
  bool has_positions = false;
  std::size_t order = 0;
  for (const auto& t : j["tasks"]) {
    for (const auto& [key, value] : t.items()) {
      if (key != "task_id" && key != "path" && key != "n_shots" && key != "position") {
        throw FormatError("task manifest: unknown key '" + key + "'");
      }
    }
    TaskSpec spec;
    spec.task_id = t.at("task_id").get<std::string>();
    fs::path p = t.at("path").get<std::string>();
    spec.image_dir = p.is_absolute() ? p : base / p;
    spec.n_shots = t.value("n_shots", std::size_t{10});
    if (t.contains("position")) {
      has_positions = true;
      spec.position = t["position"].get<std::size_t>();
    } else {
      spec.position = order;
    }
    ++order;
    specs.push_back(std::move(spec));
  }
  if (has_positions) {
    std::stable_sort(specs.begin(), specs.end(),
                     [](const TaskSpec& a, const TaskSpec& b) { return a.position < b.position; });
  }
  TaskRegistry registry;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    specs[i].position = i;
    registry.add(std::move(specs[i]));
  }
  return registry;
}

void save_task_manifest(const TaskRegistry& registry, const fs::path& manifest) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : registry.tasks()) {
    tasks.push_back({{"task_id", t.task_id},
                     {"path", t.image_dir.string()},
                     {"n_shots", t.n_shots},
                     {"position", t.position}});
  }
  nlohmann::json j = {{"schema_version", 1}, {"tasks", tasks}};
  std::ofstream out(manifest);
  if (!out) throw IoError("cannot write task manifest '" + manifest.string() + "'");
  out << j.dump(2) << "\n";
}

TaskDataset load_task(const fs::path& dir, const std::string& task_id, std::size_t resolution,
                      std::size_t channels) {
  if (channels != 1 && channels != 3) throw ArgumentError("channels must be 1 or 3");
  if (!fs::is_directory(dir)) throw DataError("task directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("task directory '" + dir.string() + "' contains no images");

  TaskDataset ds;
  ds.task_id = task_id;
  ds.resolution = resolution;
  ds.channels = channels;
  ds.images = ImageBatch({files.size(), channels, resolution, resolution});
  int first_channels = -1;
  for (std::size_t i = 0; i < files.size(); ++i) {
    int native = 0;
    cv::Mat img = decode(files[i], native);
    if (first_channels < 0) first_channels = native;
    if (native != first_channels) {
      throw DataError("image '" + files[i].filename().string() + "' has " + std::to_string(native) +
                      " channels, expected " + std::to_string(first_channels));
    }
    img = crop_and_resize(to_channels(img, channels), resolution);
    for (std::size_t y = 0; y < resolution; ++y) {
      const float* row = img.ptr<float>(static_cast<int>(y));
      for (std::size_t x = 0; x < resolution; ++x) {
        for (std::size_t c = 0; c < channels; ++c) {
          const float v = std::clamp(row[x * channels + c], 0.0f, 1.0f);
          ds.images.at(i, c, y, x) = v * 2.0f - 1.0f;
        }
      }
    }
    ds.files.push_back(files[i].filename().string());
  }
  return ds;
}

TaskDataset few_shot_subset(const TaskDataset& dataset, std::size_t n, std::uint64_t seed) {
  if (n == 0 || n > dataset.size()) {
    throw ArgumentError("few_shot_subset: cannot draw " + std::to_string(n) + " of " +
                        std::to_string(dataset.size()) + " images");
  }
  std::vector<std::size_t> index(dataset.size());
  std::iota(index.begin(), index.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(index.begin(), index.end(), rng);
  index.resize(n);
  std::sort(index.begin(), index.end());

  TaskDataset out;
  out.task_id = dataset.task_id;
  out.resolution = dataset.resolution;
  out.channels = dataset.channels;
  std::vector<ImageBatch> parts;
  for (std::size_t i : index) {
    parts.push_back(dataset.images.slice(i, i + 1));
    if (i < dataset.files.size()) out.files.push_back(dataset.files[i]);
  }
  out.images = concat_batch(parts);
  return out;
}

NoiseBatch sample_noise(std::size_t n, std::size_t latent_dim, std::uint64_t seed) {
  if (n == 0 || latent_dim == 0) throw ArgumentError("sample_noise: empty batch");
  NoiseBatch batch;
  batch.seed = seed;
  batch.values = Tensor<float>({n, latent_dim, 1, 1});
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  for (auto& v : batch.values.values()) v = dist(rng);
  return batch;
}

ImageBatch horizontal_flip(const ImageBatch& images) {
  const Shape4& s = images.shape();
  ImageBatch out(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t y = 0; y < s.h; ++y) {
        for (std::size_t x = 0; x < s.w; ++x) out.at(n, c, y, x) = images.at(n, c, y, s.w - 1 - x);
      }
    }
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char ch : tag) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::uint8_t to_u8(float v) noexcept {
  const float scaled = std::round((std::clamp(v, -1.0f, 1.0f) + 1.0f) * 127.5f);
  return static_cast<std::uint8_t>(std::clamp(scaled, 0.0f, 255.0f));
}

float from_u8(std::uint8_t v) noexcept { return static_cast<float>(v) / 127.5f - 1.0f; }

std::vector<std::uint8_t> encode_png(const ImageBatch& images, std::size_t index) {
  if (index >= images.shape().n) throw ArgumentError("encode_png: index out of range");
  return encode(to_mat_u8(images, index));
}

std::vector<std::uint8_t> encode_grid_png(const ImageBatch& images, std::size_t columns) {
  const Shape4& s = images.shape();
  if (s.n == 0 || columns == 0) throw ArgumentError("encode_grid_png: empty grid");
  const std::size_t cols = std::min(columns, s.n);
  const std::size_t rows = (s.n + cols - 1) / cols;
  const int type = s.c == 1 ? CV_8UC1 : CV_8UC3;
  cv::Mat grid(static_cast<int>(rows * s.h), static_cast<int>(cols * s.w), type, cv::Scalar::all(0));
  for (std::size_t i = 0; i < s.n; ++i) {
    const cv::Rect cell(static_cast<int>((i % cols) * s.w), static_cast<int>((i / cols) * s.h),
                        static_cast<int>(s.w), static_cast<int>(s.h));
    to_mat_u8(images, i).copyTo(grid(cell));
  }
  return encode(grid);
}

}  // namespace cfts
