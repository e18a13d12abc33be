// Copyright 2026 The dwarf-sceneflow Authors.
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
#include <vector>

#include "dwarf/tensor.hpp"

namespace dwarf {

template <typename T>
struct NamedParam {
    std::string name;
    std::vector<int64_t> dims;  // logical extents, e.g. {C} for a bias
    Tensor<T> tensor;
};

/// Ordered parameter registry. Enumeration order is registration order and
/// is the order used by checkpoints and the optimizer.
template <typename T>
class ParamStore {
   public:
    Tensor<T>& add(std::string name, std::vector<int64_t> dims, std::vector<T> values);

    const std::vector<NamedParam<T>>& entries() const { return entries_; }
    std::vector<Tensor<T>> tensors() const;
    const Tensor<T>& get(const std::string& name) const;
    int64_t count() const;  // scalar parameters
    size_t size() const { return entries_.size(); }
    void zero_grad();

   private:
    std::vector<NamedParam<T>> entries_;
};

/// Raw contents of one checkpoint record.
struct CheckpointRecord {
    std::string name;
    std::vector<int64_t> dims;
    std::vector<float> values;
};

inline constexpr char kCheckpointMagic[8] = {'D', 'W', 'A', 'R', 'F', 'C', 'K', 'P'};
inline constexpr uint32_t kCheckpointVersion = 1;

/// Layout (all integers little-endian uint32): 8-byte magic "DWARFCKP",
/// version, record count, then per record: name length, name bytes, rank,
/// rank dims, product(dims) float32 values.
std::vector<uint8_t> encode_checkpoint(const std::vector<CheckpointRecord>& records);
std::vector<CheckpointRecord> decode_checkpoint(const std::vector<uint8_t>& bytes);

template <typename T>
std::vector<CheckpointRecord> snapshot(const ParamStore<T>& store);

/// Copies records into the store; names, order and dims must match exactly.
template <typename T>
void restore(ParamStore<T>& store, const std::vector<CheckpointRecord>& records);

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ParamStore<T>& store);
template <typename T>
void load_checkpoint(const std::filesystem::path& path, ParamStore<T>& store);

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<uint8_t>& bytes);

}  // namespace dwarf
