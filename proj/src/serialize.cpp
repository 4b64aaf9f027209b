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

#include "dlu/serialize.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace dlu {
namespace {

constexpr std::array<char, 4> kMagic{'D', 'L', 'U', 'T'};

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xffu));
  }
}

template <typename U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

template <typename T>
constexpr DType dtype_of() {
  return std::is_same_v<T, float> ? DType::float32 : DType::float64;
}

template <typename T>
void append_elements(std::string& out, const BasicTensor<T>& t) {
  for (T v : t.data()) {
    if constexpr (std::is_same_v<T, float>) {
      put_le(out, std::bit_cast<std::uint32_t>(v));
    } else {
      put_le(out, std::bit_cast<std::uint64_t>(v));
    }
  }
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".json";
  return p;
}

template <typename T>
std::uint64_t checksum(const BasicTensor<T>& tensor) {
  std::string bytes;
  append_elements(bytes, tensor);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

template <typename T>
void save_tensors(const std::filesystem::path& path, const NamedTensors<T>& tensors,
                  const nlohmann::json& metadata) {
  std::string blob;
  nlohmann::json records = nlohmann::json::array();
  for (const auto& [name, t] : tensors) {
    const std::size_t offset = blob.size();
    blob.append(kMagic.data(), kMagic.size());
    put_le(blob, static_cast<std::uint32_t>(dtype_of<T>()));
    for (int d : {t.n(), t.c(), t.h(), t.w()}) put_le(blob, static_cast<std::uint64_t>(d));
    append_elements(blob, t);
    records.push_back({{"name", name},
                       {"dtype", std::is_same_v<T, float> ? "float32" : "float64"},
                       {"shape", {t.n(), t.c(), t.h(), t.w()}},
                       {"offset", offset},
                       {"checksum", hex64(checksum(t))}});
  }

  std::ofstream bin(path, std::ios::binary | std::ios::trunc);
  if (!bin) throw Error("cannot open " + path.string() + " for writing");
  bin.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!bin) throw Error("failed writing " + path.string());

  nlohmann::json side = {{"format", "dlu-tensor"},
                         {"version", 1},
                         {"endianness", "little"},
                         {"records", records},
                         {"metadata", metadata}};
  std::ofstream js(sidecar_path(path), std::ios::trunc);
  if (!js) throw Error("cannot open " + sidecar_path(path).string() + " for writing");
  js << side.dump(2) << '\n';
}

template <typename T>
NamedTensors<T> load_tensors(const std::filesystem::path& path) {
  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw Error("cannot open " + path.string());
  const std::string blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

  std::vector<std::string> names;
  if (std::ifstream js(sidecar_path(path)); js) {
    const auto side = nlohmann::json::parse(js);
    for (const auto& rec : side.at("records")) names.push_back(rec.at("name").get<std::string>());
  }

  NamedTensors<T> out;
  const auto* p = reinterpret_cast<const unsigned char*>(blob.data());
  std::size_t pos = 0;
  constexpr std::size_t kHeader = 4 + 4 + 4 * 8;
  while (pos < blob.size()) {
    if (blob.size() - pos < kHeader || std::memcmp(p + pos, kMagic.data(), 4) != 0) {
      throw Error(path.string() + ": corrupt tensor record at byte " + std::to_string(pos));
    }
    const auto dtype = static_cast<DType>(get_le<std::uint32_t>(p + pos + 4));
    std::array<std::uint64_t, 4> dims{};
    for (int i = 0; i < 4; ++i) dims[i] = get_le<std::uint64_t>(p + pos + 8 + 8 * i);
    pos += kHeader;
    const Shape shape{static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                      static_cast<int>(dims[2]), static_cast<int>(dims[3])};
    const std::size_t count = shape.numel();
    const std::size_t width = dtype == DType::float32 ? 4 : dtype == DType::float64 ? 8 : 0;
    if (width == 0) throw Error(path.string() + ": unknown dtype tag");
    if (blob.size() - pos < count * width) throw Error(path.string() + ": truncated tensor data");
    std::vector<T> values(count);
    for (std::size_t i = 0; i < count; ++i) {
      if (width == 4) {
        values[i] = static_cast<T>(std::bit_cast<float>(get_le<std::uint32_t>(p + pos)));
      } else {
        values[i] = static_cast<T>(std::bit_cast<double>(get_le<std::uint64_t>(p + pos)));
      }
      pos += width;
    }
    std::string name = out.size() < names.size() ? names[out.size()]
                                                 : "tensor" + std::to_string(out.size());
    out.emplace_back(std::move(name), BasicTensor<T>(shape, std::move(values)));
  }
  return out;
}

template <typename T>
BasicTensor<T> load_tensor(const std::filesystem::path& path) {
  auto all = load_tensors<T>(path);
  if (all.empty()) throw Error(path.string() + ": no tensor records");
  return std::move(all.front().second);
}

template std::uint64_t checksum(const BasicTensor<float>&);
template std::uint64_t checksum(const BasicTensor<double>&);
template void save_tensors(const std::filesystem::path&, const NamedTensors<float>&,
                           const nlohmann::json&);
template void save_tensors(const std::filesystem::path&, const NamedTensors<double>&,
                           const nlohmann::json&);
template NamedTensors<float> load_tensors(const std::filesystem::path&);
template NamedTensors<double> load_tensors(const std::filesystem::path&);
template BasicTensor<float> load_tensor(const std::filesystem::path&);
template BasicTensor<double> load_tensor(const std::filesystem::path&);

}  // namespace dlu
