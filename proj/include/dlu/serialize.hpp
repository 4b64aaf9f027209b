// Copyright (c) 2026 The DLU Authors. All Rights Reserved.
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
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dlu/tensor.hpp"

namespace dlu {

// Binary tensor container. A file is a sequence of records, each
//
//   magic   4 bytes  "DLUT"
//   dtype   u32      1 = float32, 2 = float64
//   dims    4 x u64  n, c, h, w
//   data    n*c*h*w elements, IEEE-754
//
// with every integer and element little-endian. A JSON sidecar at
// "<path>.json" names the records and carries free-form metadata.
enum class DType : std::uint32_t { float32 = 1, float64 = 2 };

template <typename T>
using NamedTensors = std::vector<std::pair<std::string, BasicTensor<T>>>;

template <typename T>
void save_tensors(const std::filesystem::path& path, const NamedTensors<T>& tensors,
                  const nlohmann::json& metadata = nlohmann::json::object());

// Reads every record, converting elements to T when the stored dtype differs.
template <typename T>
NamedTensors<T> load_tensors(const std::filesystem::path& path);

template <typename T>
void save_tensor(const std::filesystem::path& path, const BasicTensor<T>& tensor,
                 const nlohmann::json& metadata = nlohmann::json::object()) {
  save_tensors<T>(path, {{"tensor", tensor}}, metadata);
}

template <typename T>
BasicTensor<T> load_tensor(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

// FNV-1a over the little-endian element bytes; used for fixture checksums.
template <typename T>
std::uint64_t checksum(const BasicTensor<T>& tensor);

}  // namespace dlu
