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
#include <optional>
#include <string>
#include <vector>

#include "dwarf/data.hpp"
#include "dwarf/io.hpp"
#include "dwarf/network.hpp"

namespace dwarf {

inline constexpr double kOutlierAbsolute = 3.0;
inline constexpr double kOutlierRelative = 0.05;

/// Mean Euclidean error over pixels with mask != 0 (|d| for one channel,
/// sqrt(du^2 + dv^2) for flow). Empty mask: nullopt.
std::optional<double> epe(const Tensor<float>& pred, const Tensor<float>& gt, const Tensor<float>& mask);

/// 1 where the error exceeds 3 px and 5% of the ground-truth magnitude
/// (strictly), 0 elsewhere and on invalid pixels.
Tensor<float> outlier_map(const Tensor<float>& pred, const Tensor<float>& gt, const Tensor<float>& mask);

/// Percentage of valid pixels that are outliers. Empty mask: nullopt.
std::optional<double> outlier_rate(const Tensor<float>& pred, const Tensor<float>& gt, const Tensor<float>& mask);

/// Percentage of valid pixels that are outliers in any of the three maps.
std::optional<double> sf_all(const Tensor<float>& d1_outliers, const Tensor<float>& d2_outliers,
                             const Tensor<float>& f1_outliers, const Tensor<float>& mask);

/// Pixel-count accumulator for one mask (all or noc). Merging is associative.
struct MetricCounts {
    int64_t valid = 0;
    double epe_sum[3] = {0, 0, 0};   // disparity, change, flow
    int64_t outliers[3] = {0, 0, 0};  // D1, D2, F1
    int64_t sf_outliers = 0;

    void merge(const MetricCounts& o);
};

struct MetricReport {
    MetricCounts all, noc;
    bool has_noc = false;
    int64_t samples = 0;

    void add(const SceneFlowField& pred, const SceneFlowField& gt);
    void merge(const MetricReport& o);

    std::optional<double> epe_d1() const;
    std::optional<double> epe_d2() const;
    std::optional<double> epe_f1() const;
    std::optional<double> d1_all() const;
    std::optional<double> d2_all() const;
    std::optional<double> f1_all() const;
    std::optional<double> sf_all() const;
    std::optional<double> d1_noc() const;
    std::optional<double> d2_noc() const;
    std::optional<double> f1_noc() const;
    std::optional<double> sf_noc() const;

    /// Flat `key=value` lines; undefined values print as "nan".
    std::string to_key_values() const;
    std::string to_table() const;
};

/// One-shot report for a single prediction.
MetricReport evaluate(const SceneFlowField& pred, const SceneFlowField& gt);

/// Converts network output at input resolution (pixels) to a field.
SceneFlowField to_field(const TaskTriple<float>& full);

/// Runs the model without gradient recording on images of any size: inputs
/// are zero-padded on the bottom and right to a multiple of 64 and the
/// outputs cropped back. The mask is all ones.
template <typename T>
SceneFlowField predict(const Model<T>& model, const Tensor<float>& l1, const Tensor<float>& r1, const Tensor<float>& l2,
                       const Tensor<float>& r2);

/// Clamps a prediction into the ranges the KITTI PNG codecs accept:
/// disparities to [0, 255.99], flow components to (-512, 512).
SceneFlowField clamp_for_png(const SceneFlowField& field);

/// HSV wheel: hue = direction (+x is red, hue grows counter-clockwise with
/// image y pointing down), saturation = min(1, |f| / max_magnitude), value 1.
/// max_magnitude <= 0 uses the largest magnitude in the field.
PngImage colorize_flow(const Tensor<float>& flow, double max_magnitude = 0.0);

/// Piecewise-linear jet map from dark blue (lo) through cyan, yellow and red
/// to dark red (hi). Pixels outside `valid` (when given) and NaNs are black.
PngImage colorize_scalar(const Tensor<float>& map, double lo, double hi, const Tensor<float>* valid = nullptr);

struct BenchResult {
    std::string variant;
    int64_t parameters = 0;
    double mean_ms = 0.0, min_ms = 0.0;
    int repetitions = 0;
};

/// Times Model<float>::forward on random images without gradient recording.
/// Warmup runs are excluded from the statistics.
BenchResult bench(const ModelConfig& config, int height, int width, int repetitions, int warmup = 1);
std::vector<BenchResult> bench_variants(int height, int width, int repetitions, int warmup = 1);
std::string bench_table(const std::vector<BenchResult>& rows);

}  // namespace dwarf
