// Copyright 2026 The CMoE Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cmoe/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace cmoe {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes little-endian");

namespace {

struct Entry {
  Shape shape;
  std::uint8_t dtype = 0;
  std::vector<char> bytes;
};

template <typename T>
constexpr std::uint8_t dtype_tag() {
  return sizeof(T) == 4 ? 0 : 1;
}

template <typename V>
void put(std::ostream& os, V v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::istream& is, const std::filesystem::path& path) {
  V v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(V))) {
    throw CheckpointError("truncated checkpoint " + path.string());
  }
  return v;
}

template <typename T>
void write_entry(std::ostream& os, const std::string& name, const Shape& shape, const T* data) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint8_t>(os, dtype_tag<T>());
  put<std::uint32_t>(os, static_cast<std::uint32_t>(shape.size()));
  for (auto d : shape) put<std::uint64_t>(os, d);
  os.write(reinterpret_cast<const char*>(data),
           static_cast<std::streamsize>(shape_numel(shape) * sizeof(T)));
}

std::map<std::string, Entry> read_table(std::istream& is, const std::filesystem::path& path) {
  const auto count = get<std::uint64_t>(is, path);
  std::map<std::string, Entry> table;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(is, path);
    if (len > 4096) throw CheckpointError("corrupt entry name in " + path.string());
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw CheckpointError("truncated checkpoint " + path.string());
    Entry e;
    e.dtype = get<std::uint8_t>(is, path);
    if (e.dtype > 1) throw CheckpointError("unknown dtype tag in " + path.string());
    const auto rank = get<std::uint32_t>(is, path);
    if (rank > 8) throw CheckpointError("corrupt rank in " + path.string());
    for (std::uint32_t r = 0; r < rank; ++r) e.shape.push_back(get<std::uint64_t>(is, path));
    const std::size_t width = e.dtype == 0 ? 4 : 8;
    e.bytes.resize(shape_numel(e.shape) * width);
    if (!is.read(e.bytes.data(), static_cast<std::streamsize>(e.bytes.size()))) {
      throw CheckpointError("truncated checkpoint " + path.string());
    }
    if (!table.emplace(std::move(name), std::move(e)).second) {
      throw CheckpointError("duplicate entry in " + path.string());
    }
  }
  return table;
}

template <typename T>
void restore(const std::map<std::string, Entry>& table, const std::string& name,
             const Shape& shape, T* dst, const std::filesystem::path& path) {
  auto it = table.find(name);
  if (it == table.end()) throw CheckpointError("missing entry '" + name + "' in " + path.string());
  const Entry& e = it->second;
  if (e.shape != shape) {
    throw CheckpointError("entry '" + name + "' has shape " + shape_str(e.shape) + ", expected " +
                          shape_str(shape));
  }
  const std::size_t n = shape_numel(shape);
  if (e.dtype == dtype_tag<T>()) {
    std::memcpy(dst, e.bytes.data(), n * sizeof(T));
  } else if (e.dtype == 0) {
    const auto* src = reinterpret_cast<const float*>(e.bytes.data());
    for (std::size_t i = 0; i < n; ++i) dst[i] = static_cast<T>(src[i]);
  } else {
    const auto* src = reinterpret_cast<const double*>(e.bytes.data());
    for (std::size_t i = 0; i < n; ++i) dst[i] = static_cast<T>(src[i]);
  }
}

}  // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const nn::Registry<T>& reg,
                     optim::AdamW<T>* opt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot write " + tmp.string());
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    put<std::uint32_t>(os, kCheckpointVersion);
    put<std::uint64_t>(os, reg.params.size() + reg.buffers.size());
    for (const auto& p : reg.params) write_entry(os, p.name, p.tensor.shape(), p.tensor.values().data());
    for (const auto& b : reg.buffers) write_entry(os, b.name, Shape{b.data->size()}, b.data->data());
    put<std::uint8_t>(os, opt ? 1 : 0);
    if (opt) {
      put<std::uint64_t>(os, opt->step_count());
      const auto& ps = opt->params();
      put<std::uint64_t>(os, 2 * ps.size());
      for (std::size_t i = 0; i < ps.size(); ++i) {
        write_entry(os, ps[i].name + ".adam_m", ps[i].tensor.shape(), opt->first_moments()[i].data());
        write_entry(os, ps[i].name + ".adam_v", ps[i].tensor.shape(),
                    opt->second_moments()[i].data());
      }
    }
    if (!os) throw CheckpointError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

template <typename T>
void load_checkpoint(const std::filesystem::path& path, nn::Registry<T>& reg,
                     optim::AdamW<T>* opt) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw CheckpointError("not a checkpoint: " + path.string());
  }
  if (get<std::uint32_t>(is, path) != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version in " + path.string());
  }
  const auto table = read_table(is, path);
  for (auto& p : reg.params) {
    restore(table, p.name, p.tensor.shape(), p.tensor.values().data(), path);
  }
  for (auto& b : reg.buffers) restore(table, b.name, Shape{b.data->size()}, b.data->data(), path);

  const auto has_opt = get<std::uint8_t>(is, path);
  if (!opt || !has_opt) return;
  const auto step = get<std::uint64_t>(is, path);
  const auto moments = read_table(is, path);
  const auto& ps = opt->params();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    restore(moments, ps[i].name + ".adam_m", ps[i].tensor.shape(), opt->first_moments()[i].data(),
            path);
    restore(moments, ps[i].name + ".adam_v", ps[i].tensor.shape(),
            opt->second_moments()[i].data(), path);
  }
  opt->set_step_count(step);
}

template void save_checkpoint<float>(const std::filesystem::path&, const nn::Registry<float>&,
                                     optim::AdamW<float>*);
template void save_checkpoint<double>(const std::filesystem::path&, const nn::Registry<double>&,
                                      optim::AdamW<double>*);
template void load_checkpoint<float>(const std::filesystem::path&, nn::Registry<float>&,
                                     optim::AdamW<float>*);
template void load_checkpoint<double>(const std::filesystem::path&, nn::Registry<double>&,
                                      optim::AdamW<double>*);

}  // namespace cmoe
