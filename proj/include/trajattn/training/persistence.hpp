// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "trajattn/errors.hpp"
#include "trajattn/training/trainer.hpp"

namespace trajattn {

// Layout (all integers little-endian):
//   "TJF1"
//   u64 n, then n bytes of text metadata (one record per line)
//   u64 m, then m doubles: descriptor centroids, then model parameters in
//          the order declared by the metadata
//   u64 FNV-1a hash of every preceding byte
inline constexpr char kModelMagic[4] = {'T', 'J', 'F', '1'};
inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64(const std::string& in, std::size_t& pos) {
  if (pos + 8 > in.size()) throw LoadError("model file truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 8;
  return v;
}

inline std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline double parse_hex(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw LoadError("model file: bad number '" + s + "'");
  return v;
}

struct ModelEntry {
  std::string key;
  const TrainedModel* model;
};

}  // namespace detail

inline std::string serialize_model(const ClusterModelSet& set) {
  std::vector<detail::ModelEntry> entries;
  if (set.single_model) entries.push_back({"single", &*set.single_model});
  for (const auto& [k, m] : set.models) entries.push_back({std::to_string(k), &m});

  std::ostringstream meta;
  meta << "format_version " << kModelFormatVersion << '\n';
  meta << "ablation " << to_string(set.ablation) << '\n';
  meta << "transform " << detail::hex(set.transform.offset_x) << ' ' << detail::hex(set.transform.offset_y) << ' '
       << detail::hex(set.transform.scale) << '\n';
  meta << "descriptors " << set.descriptors.size() << '\n';
  for (const auto& d : set.descriptors) {
    meta << "descriptor " << d.cluster_id << ' ' << d.member_count << ' ' << d.centroid_observed.size() << '\n';
  }
  meta << "models " << entries.size() << '\n';
  for (const auto& e : entries) {
    const auto& c = e.model->config;
    meta << "model " << e.key << " hidden_size " << c.hidden_size << " embedding_size " << c.embedding_size
         << " t_obs " << c.t_obs << " t_pred " << c.t_pred << " mode " << to_string(c.mode) << " velocity_scale "
         << detail::hex(c.velocity_scale) << " neighbor_scale " << detail::hex(c.neighbor_scale)
         << " normalize_hardwired " << (c.normalize_hardwired ? 1 : 0) << " velocity_prior "
         << (c.velocity_prior ? 1 : 0) << " min_distance "
         << detail::hex(c.min_distance) << " params " << e.model->params.size() << '\n';
    for (const auto& [name, p] : e.model->params) {
      meta << "param " << name << ' ' << p.value.rows() << ' ' << p.value.cols() << '\n';
    }
  }
  meta << "end\n";

  std::vector<double> data;
  for (const auto& d : set.descriptors) {
    for (Point p : d.centroid_observed) {
      data.push_back(p.x);
      data.push_back(p.y);
    }
  }
  for (const auto& e : entries) {
    for (const auto& [name, p] : e.model->params) {
      for (double v : p.value.values()) data.push_back(v);
    }
  }

  std::string out(kModelMagic, 4);
  const std::string m = meta.str();
  detail::put_u64(out, m.size());
  out += m;
  detail::put_u64(out, data.size());
  for (double v : data) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  detail::put_u64(out, detail::fnv1a(out));
  return out;
}

inline ClusterModelSet deserialize_model(const std::string& bytes) {
  if (bytes.size() < 4 + 8 + 8 + 8 || bytes.compare(0, 4, kModelMagic, 4) != 0) {
    throw LoadError("not a model file (bad magic or too short)");
  }
  std::size_t pos = bytes.size() - 8;
  const std::uint64_t stored = detail::get_u64(bytes, pos);
  if (stored != detail::fnv1a(bytes.substr(0, bytes.size() - 8))) {
    throw LoadError("model file checksum mismatch (corrupt or truncated)");
  }
  pos = 4;
  const std::uint64_t meta_len = detail::get_u64(bytes, pos);
  if (meta_len > bytes.size() - pos) throw LoadError("model file truncated in metadata");
  std::istringstream meta(bytes.substr(pos, meta_len));
  pos += meta_len;
  const std::uint64_t n_values = detail::get_u64(bytes, pos);
  if (n_values > (bytes.size() - pos - 8) / 8 || (bytes.size() - pos - 8) != 8 * n_values) {
    throw LoadError("model file data block has the wrong size");
  }
  std::size_t next = 0;
  auto take = [&]() {
    if (next >= n_values) throw LoadError("model file: metadata declares more values than stored");
    ++next;
    return std::bit_cast<double>(detail::get_u64(bytes, pos));
  };

  auto expect = [&](const std::string& word) {
    std::string w;
    if (!(meta >> w) || w != word) throw LoadError("model file: expected '" + word + "' in metadata");
  };
  auto read_size = [&]() {
    long long v = -1;
    if (!(meta >> v) || v < 0) throw LoadError("model file: bad count in metadata");
    return static_cast<std::size_t>(v);
  };
  auto read_word = [&]() {
    std::string w;
    if (!(meta >> w)) throw LoadError("model file: metadata ended early");
    return w;
  };

  ClusterModelSet set;
  expect("format_version");
  if (const auto v = read_size(); v != static_cast<std::size_t>(kModelFormatVersion)) {
    throw LoadError("unsupported model format version " + std::to_string(v));
  }
  expect("ablation");
  try {
    set.ablation = parse_ablation(read_word());
  } catch (const ConfigError& e) {
    throw LoadError(std::string("model file: ") + e.what());
  }
  expect("transform");
  set.transform.offset_x = detail::parse_hex(read_word());
  set.transform.offset_y = detail::parse_hex(read_word());
  set.transform.scale = detail::parse_hex(read_word());

  expect("descriptors");
  const std::size_t n_desc = read_size();
  std::vector<std::size_t> desc_len;
  for (std::size_t i = 0; i < n_desc; ++i) {
    expect("descriptor");
    ClusterDescriptor d;
    d.cluster_id = static_cast<int>(read_size());
    d.member_count = read_size();
    desc_len.push_back(read_size());
    set.descriptors.push_back(std::move(d));
  }

  struct PendingModel {
    std::string key;
    TrainedModel model;
    std::vector<std::string> names;
  };
  std::vector<PendingModel> pending;
  expect("models");
  const std::size_t n_models = read_size();
  for (std::size_t i = 0; i < n_models; ++i) {
    expect("model");
    PendingModel pm;
    pm.key = read_word();
    auto& c = pm.model.config;
    expect("hidden_size");
    c.hidden_size = read_size();
    expect("embedding_size");
    c.embedding_size = read_size();
    expect("t_obs");
    c.t_obs = read_size();
    expect("t_pred");
    c.t_pred = read_size();
    expect("mode");
    const auto mode = read_word();
    if (mode == "combined") {
      c.mode = AttentionMode::combined;
    } else if (mode == "soft_only") {
      c.mode = AttentionMode::soft_only;
    } else {
      throw LoadError("model file: unknown attention mode '" + mode + "'");
    }
    expect("velocity_scale");
    c.velocity_scale = detail::parse_hex(read_word());
    expect("neighbor_scale");
    c.neighbor_scale = detail::parse_hex(read_word());
    expect("normalize_hardwired");
    c.normalize_hardwired = read_size() != 0;
    expect("velocity_prior");
    c.velocity_prior = read_size() != 0;
    expect("min_distance");
    c.min_distance = detail::parse_hex(read_word());
    try {
      validate(c);
    } catch (const ConfigError& e) {
      throw LoadError(std::string("model file: invalid model config: ") + e.what());
    }
    expect("params");
    const std::size_t n_params = read_size();
    for (std::size_t j = 0; j < n_params; ++j) {
      expect("param");
      const auto name = read_word();
      const std::size_t rows = read_size(), cols = read_size();
      if (rows == 0 || cols == 0) throw LoadError("model file: empty parameter " + name);
      try {
        pm.model.params.add(name, rows, cols);
      } catch (const ArgumentError& e) {
        throw LoadError(std::string("model file: ") + e.what());
      }
    }
    pending.push_back(std::move(pm));
  }
  expect("end");

  for (std::size_t i = 0; i < set.descriptors.size(); ++i) {
    auto& d = set.descriptors[i];
    d.centroid_observed.resize(desc_len[i]);
    for (auto& p : d.centroid_observed) {
      p.x = take();
      p.y = take();
    }
  }
  for (auto& pm : pending) {
    for (auto& [name, p] : pm.model.params) {
      for (double& v : p.value.values()) v = take();
    }
    // Every parameter the model needs must be present.
    try {
      (void)bind_parameters(pm.model.params);
    } catch (const ArgumentError& e) {
      throw LoadError(std::string("model file: ") + e.what());
    }
    if (pm.key == "single") {
      if (set.single_model) throw LoadError("model file: two single models");
      set.single_model = std::move(pm.model);
    } else {
      const int k = static_cast<int>(std::strtol(pm.key.c_str(), nullptr, 10));
      if (!set.models.emplace(k, std::move(pm.model)).second) throw LoadError("model file: duplicate cluster model");
    }
  }
  if (next != n_values) throw LoadError("model file: stored values do not match the metadata");
  if (!set.single_model && set.models.empty()) throw LoadError("model file holds no models");
  return set;
}

inline void save_model(const ClusterModelSet& set, const std::filesystem::path& path) {
  const std::string bytes = serialize_model(set);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("failed writing " + path.string());
}

inline ClusterModelSet load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open model file " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace trajattn
