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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dwarf/data.hpp"
#include "dwarf/tensor.hpp"

namespace dwarf {

/// Decoding failure; `offset` is the byte position where parsing stopped.
class FormatError : public std::runtime_error {
   public:
    FormatError(const std::string& what, size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
    size_t offset() const { return offset_; }

   private:
    size_t offset_;
};

// ---------------------------------------------------------------------------
// PFM

/// Rows top to bottom, channels interleaved (1 for "Pf", 3 for "PF").
struct PfmImage {
    int width = 0, height = 0, channels = 1;
    std::vector<float> data;
};

/// "Pf"/"PF" header line, "W H" line, scale line "-1" (little-endian), then
/// float32 rows from bottom to top. A 1x1 map of 3.5 encodes to the 14 bytes
/// 50 66 0a 31 20 31 0a 2d 31 0a 00 00 60 40.
std::vector<uint8_t> encode_pfm(const PfmImage& image);
/// Accepts either byte order (negative scale: little-endian).
PfmImage decode_pfm(const std::vector<uint8_t>& bytes);

/// Single-channel disparity with NaN at invalid pixels.
std::vector<uint8_t> encode_disparity_pfm(const Tensor<float>& disparity, const Tensor<float>& mask);
std::pair<Tensor<float>, Tensor<float>> decode_disparity_pfm(const std::vector<uint8_t>& bytes);
/// Three-channel (u, v, 0) flow with NaN at invalid pixels.
std::vector<uint8_t> encode_flow_pfm(const Tensor<float>& flow, const Tensor<float>& mask);
std::pair<Tensor<float>, Tensor<float>> decode_flow_pfm(const std::vector<uint8_t>& bytes);

// ---------------------------------------------------------------------------
// PNG (libpng)

struct PngImage {
    int width = 0, height = 0, channels = 0, bit_depth = 8;
    std::vector<uint16_t> samples;  // row-major, interleaved
};

std::vector<uint8_t> encode_png(const PngImage& image);
/// Palette and sub-byte images are expanded to 8 bits.
PngImage decode_png(const std::vector<uint8_t>& bytes);

inline constexpr double kFlowPngScale = 64.0;
inline constexpr int kFlowPngZero = 1 << 15;
inline constexpr double kDispPngScale = 256.0;

/// KITTI flow: 16-bit RGB, value = round(64 c + 32768) per component, blue =
/// validity. Throws listing pixels with |u| or |v| >= 512.
std::vector<uint8_t> encode_flow_png(const Tensor<float>& flow, const Tensor<float>& mask);
std::pair<Tensor<float>, Tensor<float>> decode_flow_png(const std::vector<uint8_t>& bytes);

/// KITTI disparity: 16-bit grey, value = round(256 d), 0 = invalid. Valid
/// pixels that would round to 0 are stored as 1. Throws on d < 0 or d >= 256.
std::vector<uint8_t> encode_disparity_png(const Tensor<float>& disparity, const Tensor<float>& mask);
std::pair<Tensor<float>, Tensor<float>> decode_disparity_png(const std::vector<uint8_t>& bytes);

/// 8-bit RGB of a (1, 3, H, W) image in [0, 1].
std::vector<uint8_t> encode_rgb_png(const Tensor<float>& image);
/// Grey and alpha images are converted to RGB.
Tensor<float> decode_rgb_png(const std::vector<uint8_t>& bytes);
/// 8-bit single-channel mask (0 or 255).
std::vector<uint8_t> encode_mask_png(const Tensor<float>& mask);
Tensor<float> decode_mask_png(const std::vector<uint8_t>& bytes);

Tensor<float> read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Tensor<float>& image);

// ---------------------------------------------------------------------------
// Samples on disk and manifests

enum class GtFormat { Kitti, Pfm };
GtFormat parse_gt_format(const std::string& name);

/// Reads a disparity map by extension (.png KITTI, .pfm).
std::pair<Tensor<float>, Tensor<float>> read_disparity(const std::filesystem::path& path);
void write_disparity(const std::filesystem::path& path, const Tensor<float>& disparity, const Tensor<float>& mask);
std::pair<Tensor<float>, Tensor<float>> read_flow(const std::filesystem::path& path);
void write_flow(const std::filesystem::path& path, const Tensor<float>& flow, const Tensor<float>& mask);

struct ManifestEntry {
    int line = 0;
    std::array<std::filesystem::path, 4> images;                 // L1 R1 L2 R2
    std::optional<std::array<std::filesystem::path, 3>> truth;   // D1 F1 D2
    std::optional<std::filesystem::path> noc;                    // optional non-occlusion mask
    Provenance provenance = Provenance::Gt;
};

struct Manifest {
    std::vector<ManifestEntry> entries;
    /// Indices of entries with the given provenance, in file order.
    std::vector<size_t> pool(Provenance p) const;
};

/// One sample per line, tab-separated: L1 R1 L2 R2 [D1 F1 D2 [NOC]] token,
/// token in {gt, px}. Relative paths resolve against the manifest's
/// directory. '#' starts a comment line. Every referenced file must exist.
Manifest load_manifest(const std::filesystem::path& path, bool require_truth = false);
/// Writes entries with paths relative to the manifest's directory.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

SceneSample load_sample(const ManifestEntry& entry);
/// Writes images and ground truth as <dir>/<stem>_{l1,r1,l2,r2}.png plus
/// _d1/_f1/_d2 in the chosen format and _noc.png when present.
ManifestEntry write_sample(const std::filesystem::path& dir, const std::string& stem, const SceneSample& sample,
                           GtFormat format);

}  // namespace dwarf
