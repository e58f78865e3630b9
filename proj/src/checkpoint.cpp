// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0

#include "cfts/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <nlohmann/json.hpp>

#include "cfts/error.hpp"
#include "cfts/io.hpp"

namespace cfts {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little, "blob IO assumes a little-endian host");

constexpr char kMagic[8] = {'C', 'F', 'T', 'S', 'T', 'N', 'S', '1'};

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + 8);
}

json generator_json(const GeneratorConfig& c) {
  return {{"latent_dim", c.latent_dim}, {"resolution", c.resolution}, {"channels", c.channels},
          {"max_width", c.max_width},   {"min_width", c.min_width}};
}

json discriminator_json(const DiscriminatorConfig& c) {
  return {{"resolution", c.resolution}, {"channels", c.channels}, {"base_width", c.base_width},
          {"max_width", c.max_width},   {"hidden", c.hidden}};
}

json architecture_json(const GeneratorConfig& g, const std::optional<DiscriminatorConfig>& d) {
  json j = {{"generator", generator_json(g)}};
  if (d) j["discriminator"] = discriminator_json(*d);
  return j;
}

template <typename T>
T read_field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(std::string("checkpoint manifest: bad or missing field '") + key + "'");
  }
}

RawTensor to_raw(const Parameter<float>& p) { return {p.shape, p.value}; }

json describe(const ParameterGroup<float>& group) {
  json tensors = json::array();
  for (const auto& p : group.params()) tensors.push_back({{"name", p.name}, {"shape", p.shape}});
  return tensors;
}

std::vector<std::uint8_t> encode_group(const ParameterGroup<float>& group) {
  std::vector<RawTensor> raw;
  for (const auto& p : group.params()) raw.push_back(to_raw(p));
  return encode_tensor_blob(raw);
}

void fill_group(ParameterGroup<float>& group, const json& entry, const fs::path& dir) {
  const auto file = read_field<std::string>(entry, "file");
  const std::vector<std::uint8_t> bytes = read_bytes(dir / file);
  if (sha256_hex(bytes) != read_field<std::string>(entry, "sha256")) {
    throw FormatError("checkpoint blob '" + file + "' does not match its recorded digest");
  }
  const std::vector<RawTensor> raw = decode_tensor_blob(bytes);
  const json& tensors = entry.at("tensors");
  if (raw.size() != group.params().size() || tensors.size() != raw.size()) {
    throw FormatError("checkpoint blob '" + file + "' holds " + std::to_string(raw.size()) + " tensors, expected " +
                      std::to_string(group.params().size()));
  }
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto& p = group.params()[i];
    if (tensors[i].at("name").get<std::string>() != p.name || raw[i].shape != p.shape) {
      throw ConsistencyError("checkpoint tensor '" + p.name + "' does not match the architecture");
    }
    p.value = raw[i].data;
  }
}

}  // namespace

std::vector<std::uint8_t> encode_tensor_blob(const std::vector<RawTensor>& tensors) {
  std::vector<std::uint8_t> out;
  for (const auto& t : tensors) {
    std::size_t count = 1;
    for (auto d : t.shape) count *= d;
    if (count != t.data.size()) throw ArgumentError("tensor data does not match its shape");
    out.insert(out.end(), kMagic, kMagic + 8);
    put_u64(out, t.shape.size());
    for (auto d : t.shape) put_u64(out, d);
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.data.data());
    out.insert(out.end(), p, p + t.data.size() * sizeof(float));
  }
  return out;
}

std::vector<RawTensor> decode_tensor_blob(const std::vector<std::uint8_t>& bytes) {
  std::vector<RawTensor> out;
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (bytes.size() - pos < n) throw FormatError("tensor blob is truncated");
  };
  auto get_u64 = [&]() {
    need(8);
    std::uint64_t v = 0;
    std::memcpy(&v, bytes.data() + pos, 8);
    pos += 8;
    return v;
  };
  while (pos < bytes.size()) {
    need(8);
    if (std::memcmp(bytes.data() + pos, kMagic, 8) != 0) throw FormatError("tensor blob has a bad magic");
    pos += 8;
    const std::uint64_t rank = get_u64();
    if (rank > 8) throw FormatError("tensor blob rank " + std::to_string(rank) + " is implausible");
    RawTensor t;
    std::uint64_t count = 1;
    for (std::uint64_t i = 0; i < rank; ++i) {
      const std::uint64_t d = get_u64();
      if (d != 0 && count > (std::uint64_t{1} << 40) / d) throw FormatError("tensor blob dimensions overflow");
      count *= d;
      t.shape.push_back(static_cast<std::size_t>(d));
    }
    need(count * sizeof(float));
    t.data.resize(count);
    std::memcpy(t.data.data(), bytes.data() + pos, count * sizeof(float));
    pos += count * sizeof(float);
    out.push_back(std::move(t));
  }
  return out;
}

std::string to_string(CheckpointRole role) {
  switch (role) {
    case CheckpointRole::source: return "source";
    case CheckpointRole::teacher: return "teacher";
    case CheckpointRole::student: return "student";
  }
  return "unknown";
}

CheckpointRole parse_checkpoint_role(const std::string& s) {
  if (s == "source") return CheckpointRole::source;
  if (s == "teacher") return CheckpointRole::teacher;
  if (s == "student") return CheckpointRole::student;
  throw FormatError("unknown checkpoint role '" + s + "'");
}

std::string architecture_hash(const GeneratorConfig& g, const std::optional<DiscriminatorConfig>& d) {
  const std::string canonical = architecture_json(g, d).dump();
  return sha256_hex(reinterpret_cast<const std::uint8_t*>(canonical.data()), canonical.size());
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& dir, bool force) {
  const GeneratorConfig& gc = ckpt.generator.config();
  std::optional<DiscriminatorConfig> dc;
  if (ckpt.discriminator) dc = ckpt.discriminator->config();

  json groups = json::array();
  auto add_group = [&](const std::string& name, const std::string& file, const ParameterGroup<float>& g) {
    const auto bytes = encode_group(g);
    write_output(dir / file, bytes, force);
    groups.push_back({{"name", name}, {"file", file}, {"sha256", sha256_hex(bytes)}, {"tensors", describe(g)}});
  };
  add_group("generator", "generator.bin", ckpt.generator.global_params());
  const auto& ids = ckpt.generator.task_ids();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    add_group("adapters/" + ids[i], "adapters_" + std::to_string(i) + ".bin", ckpt.generator.bank(ids[i]).params);
  }
  if (ckpt.discriminator) add_group("discriminator", "discriminator.bin", ckpt.discriminator->params());

  json seeds = json::object();
  for (const auto& [k, v] : ckpt.seeds) seeds[k] = v;
  seeds["generator_init"] = gc.seed;
  if (dc) seeds["discriminator_init"] = dc->seed;

  json manifest = {{"format_version", kCheckpointFormatVersion},
                   {"role", to_string(ckpt.role)},
                   {"task_id", ckpt.task_id},
                   {"architecture", architecture_json(gc, dc)},
                   {"architecture_hash", architecture_hash(gc, dc)},
                   {"tasks", ids},
                   {"seeds", seeds},
                   {"groups", groups}};
  if (ckpt.discriminator) manifest["discriminator_trainable_suffix"] = ckpt.discriminator->trainable_suffix();
  write_output(dir / "manifest.json", manifest.dump(2) + "\n", force);
}

Checkpoint load_checkpoint(const fs::path& dir, const std::optional<std::string>& expected_hash) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw IoError("no checkpoint at '" + dir.string() + "'");
  json m;
  try {
    m = json::parse(read_text(manifest_path));
  } catch (const json::exception& e) {
    throw FormatError("checkpoint manifest '" + manifest_path.string() + "': " + e.what());
  }
  if (read_field<int>(m, "format_version") != kCheckpointFormatVersion) {
    throw FormatError("unsupported checkpoint format_version");
  }
  const json& arch = m.at("architecture");
  const json& seeds = m.at("seeds");
  GeneratorConfig gc;
  const json& gj = arch.at("generator");
  gc.latent_dim = read_field<std::size_t>(gj, "latent_dim");
  gc.resolution = read_field<std::size_t>(gj, "resolution");
  gc.channels = read_field<std::size_t>(gj, "channels");
  gc.max_width = read_field<std::size_t>(gj, "max_width");
  gc.min_width = read_field<std::size_t>(gj, "min_width");
  gc.seed = read_field<std::uint64_t>(seeds, "generator_init");
  std::optional<DiscriminatorConfig> dc;
  if (arch.contains("discriminator")) {
    const json& dj = arch["discriminator"];
    DiscriminatorConfig d;
    d.resolution = read_field<std::size_t>(dj, "resolution");
    d.channels = read_field<std::size_t>(dj, "channels");
    d.base_width = read_field<std::size_t>(dj, "base_width");
    d.max_width = read_field<std::size_t>(dj, "max_width");
    d.hidden = read_field<std::size_t>(dj, "hidden");
    d.seed = read_field<std::uint64_t>(seeds, "discriminator_init");
    dc = d;
  }
  const std::string recorded = read_field<std::string>(m, "architecture_hash");
  if (architecture_hash(gc, dc) != recorded) {
    throw ConsistencyError("checkpoint '" + dir.string() + "': architecture does not match its recorded hash");
  }
  if (expected_hash && *expected_hash != recorded) {
    throw ConsistencyError("checkpoint '" + dir.string() + "': architecture hash " + recorded + " differs from expected " +
                           *expected_hash);
  }

  Checkpoint ckpt;
  ckpt.role = parse_checkpoint_role(read_field<std::string>(m, "role"));
  ckpt.task_id = read_field<std::string>(m, "task_id");
  ckpt.generator = build_generator(gc);
  for (const auto& [k, v] : seeds.items()) {
    if (k != "generator_init" && k != "discriminator_init") ckpt.seeds[k] = v.get<std::uint64_t>();
  }
  for (const auto& id : read_field<std::vector<std::string>>(m, "tasks")) ckpt.generator.add_task_adapters(id);
  if (dc) ckpt.discriminator = build_discriminator(*dc);

  for (const auto& entry : m.at("groups")) {
    const auto name = read_field<std::string>(entry, "name");
    if (name == "generator") {
      fill_group(ckpt.generator.global_params(), entry, dir);
    } else if (name == "discriminator" && ckpt.discriminator) {
      fill_group(ckpt.discriminator->params(), entry, dir);
    } else if (name.rfind("adapters/", 0) == 0 && ckpt.generator.has_task(name.substr(9))) {
      fill_group(ckpt.generator.bank(name.substr(9)).params, entry, dir);
    } else {
      throw FormatError("checkpoint manifest: unexpected group '" + name + "'");
    }
  }
  if (ckpt.discriminator && m.contains("discriminator_trainable_suffix")) {
    ckpt.discriminator->set_trainable_suffix(m["discriminator_trainable_suffix"].get<std::size_t>());
  }
  return ckpt;
}

std::string checkpoint_digest(const fs::path& dir) { return sha256_hex(read_bytes(dir / "manifest.json")); }

}  // namespace cfts
