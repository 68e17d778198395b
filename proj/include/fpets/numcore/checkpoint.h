// Copyright 2026 The FPETS Authors
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

// Named-tensor container shared by model checkpoints and feature caches.
//
// Layout (all integers little-endian):
//   char[8]  magic "FPETSCKP"
//   u32      version (1)
//   u32      tensor count
//   per tensor:
//     u32    name length, then that many UTF-8 bytes
//     u8     rank
//     u64    extent, repeated rank times
//     f64    values, row-major

#ifndef FPETS_NUMCORE_CHECKPOINT_H_
#define FPETS_NUMCORE_CHECKPOINT_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fpets/numcore/tensor.h"

namespace fpets {

inline constexpr char kCheckpointMagic[8] = {'F', 'P', 'E', 'T',
                                             'S', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class Checkpoint {
 public:
  // Replaces an existing entry of the same name.
  void put(std::string name, const Tensor& tensor);
  bool has(std::string_view name) const;
  // Throws FormatError if absent.
  const Tensor& get(std::string_view name) const;

  void put_string(std::string name, std::string_view text);
  std::string get_string(std::string_view name) const;

  const std::vector<std::pair<std::string, Tensor>>& entries() const {
    return entries_;
  }
  std::size_t size() const { return entries_.size(); }

  std::string serialize() const;
  static Checkpoint deserialize(std::string_view bytes);

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

// 64-bit FNV-1a, used for config and cache fingerprints.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace fpets

#endif  // FPETS_NUMCORE_CHECKPOINT_H_
