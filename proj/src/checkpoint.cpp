// Copyright 2026 The scaledepth Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "scaledepth/checkpoint.hpp"

#include <bit>
#include <fstream>

namespace sd::checkpoint {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'S', 'D', 'C', 'K'};

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ostream& os, const std::string& s) {
  put<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <class T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

std::string get_string(std::istream& is) {
  const auto n = get<std::uint64_t>(is);
  if (n > (1ULL << 32)) throw std::runtime_error("checkpoint: corrupt string length");
  std::string s(n, '\0');
  if (!is.read(s.data(), static_cast<std::streamsize>(n))) throw std::runtime_error("checkpoint: truncated file");
  return s;
}

}  // namespace

const Mat* Archive::find(const std::string& name) const {
  for (const auto& [n, m] : tensors)
    if (n == name) return &m;
  return nullptr;
}

void save_archive(const Archive& a, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot write " + path.string());
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kVersion);
  put<std::uint64_t>(os, a.config_hash);
  put_string(os, a.config_text);
  put<std::uint64_t>(os, a.meta.size());
  for (const auto& [k, v] : a.meta) {
    put_string(os, k);
    put_string(os, v);
  }
  put<std::uint64_t>(os, a.tensors.size());
  for (const auto& [name, m] : a.tensors) {
    put_string(os, name);
    put<std::int64_t>(os, m.rows());
    put<std::int64_t>(os, m.cols());
    os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Archive load_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kMagic))
    throw std::runtime_error("checkpoint: not a checkpoint file: " + path.string());
  const auto version = get<std::uint32_t>(is);
  if (version != kVersion) throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(version));
  Archive a;
  a.config_hash = get<std::uint64_t>(is);
  a.config_text = get_string(is);
  const auto n_meta = get<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < n_meta; ++i) {
    std::string k = get_string(is);
    a.meta[k] = get_string(is);
  }
  const auto n_tensors = get<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < n_tensors; ++i) {
    std::string name = get_string(is);
    const auto rows = get<std::int64_t>(is), cols = get<std::int64_t>(is);
    if (rows < 0 || cols < 0 || rows * cols > (1LL << 31)) throw std::runtime_error("checkpoint: corrupt tensor shape");
    Mat m(rows, cols);
    if (!is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double))))
      throw std::runtime_error("checkpoint: truncated file");
    a.tensors.emplace_back(std::move(name), std::move(m));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw std::runtime_error("checkpoint: trailing bytes");
  return a;
}

Archive archive_model(const network::Model& model) {
  Archive a;
  a.config_text = model.config().canonical();
  a.config_hash = model.config().hash();
  for (const Parameter& p : model.parameters()) a.tensors.emplace_back(p.name, p.value);
  return a;
}

void restore_parameters(network::Model& model, const Archive& a) {
  if (a.config_hash != model.config().hash())
    throw ConfigMismatch("checkpoint was written for a different model configuration");
  for (Parameter& p : model.parameters()) {
    const Mat* m = a.find(p.name);
    if (!m) throw std::runtime_error("checkpoint: missing tensor " + p.name);
    if (m->rows() != p.value.rows() || m->cols() != p.value.cols())
      throw std::runtime_error("checkpoint: shape mismatch for " + p.name);
    p.value = *m;
  }
}

void save_model(const network::Model& model, const std::filesystem::path& path) {
  save_archive(archive_model(model), path);
}

network::Model load_model(const std::filesystem::path& path) {
  Archive a = load_archive(path);
  network::ModelConfig cfg = network::ModelConfig::parse(a.config_text);
  if (cfg.hash() != a.config_hash) throw ConfigMismatch("checkpoint config text does not match its hash");
  network::Model model(cfg, 0);
  restore_parameters(model, a);
  return model;
}

}  // namespace sd::checkpoint
