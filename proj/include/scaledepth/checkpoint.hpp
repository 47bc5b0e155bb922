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

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "scaledepth/autograd.hpp"
#include "scaledepth/network.hpp"

// Binary archive: "SDCK", format version, config hash, canonical config text,
// string metadata, then named row-major double tensors. Little-endian only.
namespace sd::checkpoint {

inline constexpr std::uint32_t kVersion = 1;

class ConfigMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Archive {
  std::string config_text;
  std::uint64_t config_hash = 0;
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Mat>> tensors;

  const Mat* find(const std::string& name) const;
};

void save_archive(const Archive& a, const std::filesystem::path& path);
Archive load_archive(const std::filesystem::path& path);

Archive archive_model(const network::Model& model);
/// Copies tensors into `model`; throws ConfigMismatch when the archive was
/// written for a different configuration.
void restore_parameters(network::Model& model, const Archive& a);

void save_model(const network::Model& model, const std::filesystem::path& path);
network::Model load_model(const std::filesystem::path& path);

}  // namespace sd::checkpoint
