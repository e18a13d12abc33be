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

#include "dwarf/params.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

namespace dwarf {

namespace {

Shape shape_of(const std::vector<int64_t>& dims) {
    Shape s{1, 1, 1, 1};
    int64_t* slots[4] = {&s.n, &s.c, &s.h, &s.w};
    if (dims.size() > 4) throw ShapeError("parameters have at most 4 dimensions");
    for (size_t i = 0; i < dims.size(); ++i) *slots[i] = dims[i];
    return s;
}

int64_t product(const std::vector<int64_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), int64_t{1}, std::multiplies<>());
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

class Reader {
   public:
    explicit Reader(const std::vector<uint8_t>& b) : bytes_(b) {}
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    void copy(void* dst, size_t n) {
        need(n);
        std::memcpy(dst, bytes_.data() + pos_, n);
        pos_ += n;
    }
    size_t pos() const { return pos_; }
    bool done() const { return pos_ == bytes_.size(); }

   private:
    void need(size_t n) const {
        if (pos_ + n > bytes_.size())
            throw std::runtime_error("checkpoint truncated at byte " + std::to_string(pos_));
    }
    const std::vector<uint8_t>& bytes_;
    size_t pos_ = 0;
};

}  // namespace

template <typename T>
Tensor<T>& ParamStore<T>::add(std::string name, std::vector<int64_t> dims, std::vector<T> values) {
    for (const auto& e : entries_)
        if (e.name == name) throw std::invalid_argument("duplicate parameter name " + name);
    Shape s = shape_of(dims);
    entries_.push_back({std::move(name), std::move(dims), Tensor<T>::from(s, std::move(values), true)});
    return entries_.back().tensor;
}

template <typename T>
std::vector<Tensor<T>> ParamStore<T>::tensors() const {
    std::vector<Tensor<T>> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.tensor);
    return out;
}

template <typename T>
const Tensor<T>& ParamStore<T>::get(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return e.tensor;
    throw std::out_of_range("no parameter named " + name);
}

template <typename T>
int64_t ParamStore<T>::count() const {
    int64_t n = 0;
    for (const auto& e : entries_) n += e.tensor.numel();
    return n;
}

template <typename T>
void ParamStore<T>::zero_grad() {
    for (auto& e : entries_) e.tensor.zero_grad();
}

std::vector<uint8_t> encode_checkpoint(const std::vector<CheckpointRecord>& records) {
    static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes a little-endian host");
    std::vector<uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<uint32_t>(records.size()));
    for (const auto& r : records) {
        if (static_cast<int64_t>(r.values.size()) != product(r.dims))
            throw std::invalid_argument("checkpoint record " + r.name + " has inconsistent size");
        put_u32(out, static_cast<uint32_t>(r.name.size()));
        out.insert(out.end(), r.name.begin(), r.name.end());
        put_u32(out, static_cast<uint32_t>(r.dims.size()));
        for (int64_t d : r.dims) put_u32(out, static_cast<uint32_t>(d));
        const auto* raw = reinterpret_cast<const uint8_t*>(r.values.data());
        out.insert(out.end(), raw, raw + r.values.size() * sizeof(float));
    }
    return out;
}

std::vector<CheckpointRecord> decode_checkpoint(const std::vector<uint8_t>& bytes) {
    Reader in(bytes);
    char magic[8];
    in.copy(magic, sizeof magic);
    if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw std::runtime_error("not a DWARF checkpoint (bad magic)");
    const uint32_t version = in.u32();
    if (version != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    const uint32_t count = in.u32();
    std::vector<CheckpointRecord> records;
    records.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        CheckpointRecord r;
        r.name.resize(in.u32());
        in.copy(r.name.data(), r.name.size());
        const uint32_t rank = in.u32();
        if (rank > 4) throw std::runtime_error("checkpoint record " + r.name + " has rank " + std::to_string(rank));
        for (uint32_t d = 0; d < rank; ++d) r.dims.push_back(in.u32());
        r.values.resize(static_cast<size_t>(product(r.dims)));
        in.copy(r.values.data(), r.values.size() * sizeof(float));
        records.push_back(std::move(r));
    }
    if (!in.done()) throw std::runtime_error("trailing bytes after checkpoint at offset " + std::to_string(in.pos()));
    return records;
}

template <typename T>
std::vector<CheckpointRecord> snapshot(const ParamStore<T>& store) {
    std::vector<CheckpointRecord> out;
    for (const auto& e : store.entries()) {
        CheckpointRecord r{e.name, e.dims, {}};
        r.values.reserve(static_cast<size_t>(e.tensor.numel()));
        for (T v : e.tensor.data()) r.values.push_back(static_cast<float>(v));
        out.push_back(std::move(r));
    }
    return out;
}

template <typename T>
void restore(ParamStore<T>& store, const std::vector<CheckpointRecord>& records) {
    const auto& entries = store.entries();
    if (records.size() != entries.size())
        throw std::runtime_error("checkpoint has " + std::to_string(records.size()) + " parameters, model expects " +
                                 std::to_string(entries.size()));
    for (size_t i = 0; i < records.size(); ++i) {
        if (records[i].name != entries[i].name || records[i].dims != entries[i].dims)
            throw std::runtime_error("checkpoint parameter " + std::to_string(i) + " (" + records[i].name +
                                     ") does not match model parameter " + entries[i].name);
    }
    for (size_t i = 0; i < records.size(); ++i) {
        Tensor<T> t = entries[i].tensor;
        auto dst = t.data();
        for (size_t j = 0; j < dst.size(); ++j) dst[j] = static_cast<T>(records[i].values[j]);
    }
}

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + path.string());
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ParamStore<T>& store) {
    write_file_bytes(path, encode_checkpoint(snapshot(store)));
}

template <typename T>
void load_checkpoint(const std::filesystem::path& path, ParamStore<T>& store) {
    restore(store, decode_checkpoint(read_file_bytes(path)));
}

template class ParamStore<float>;
template class ParamStore<double>;
template std::vector<CheckpointRecord> snapshot(const ParamStore<float>&);
template std::vector<CheckpointRecord> snapshot(const ParamStore<double>&);
template void restore(ParamStore<float>&, const std::vector<CheckpointRecord>&);
template void restore(ParamStore<double>&, const std::vector<CheckpointRecord>&);
template void save_checkpoint(const std::filesystem::path&, const ParamStore<float>&);
template void save_checkpoint(const std::filesystem::path&, const ParamStore<double>&);
template void load_checkpoint(const std::filesystem::path&, ParamStore<float>&);
template void load_checkpoint(const std::filesystem::path&, ParamStore<double>&);

}  // namespace dwarf
