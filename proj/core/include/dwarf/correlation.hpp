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
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "dwarf/tensor.hpp"

namespace dwarf {

/// Search radii and scoring options shared by the three correlation layers.
struct CorrConfig {
    int rx = 4;
    int ry = 4;
    int rz = 0;
    /// Divide scores by the summed axis length: channels for feature
    /// correlation, curve length for curve correlation.
    bool normalize = true;
    /// Leaky-ReLU the volumes before they are stacked into the estimator input.
    bool post_activation = true;
};

/// Scores stacked along the channel axis, one channel per displacement in
/// lexicographic order of `radii` (outermost first), each running -r..+r.
template <typename T>
struct CostVolume {
    Tensor<T> scores;
    std::vector<int> radii;

    int64_t channels() const { return scores.shape().c; }
    /// Length of the displacement curve of a 1D volume (2 r_x + 1).
    int64_t curve_length() const { return radii.size() == 1 ? 2 * radii[0] + 1 : channels(); }
};

/// Product of (2r + 1) over the radii.
int64_t displacement_count(std::span<const int> radii);

/// Horizontal matching: score(y, x)[j + rx] = <a(y, x), b(y, x + j)>.
template <typename T>
CostVolume<T> corr1d(const Tensor<T>& a, const Tensor<T>& b, const CorrConfig& cfg);

/// Window matching: score(y, x)[(i + ry)(2rx + 1) + j + rx] = <a(y, x), b(y + i, x + j)>.
template <typename T>
CostVolume<T> corr2d(const Tensor<T>& a, const Tensor<T>& b, const CorrConfig& cfg);

/// Correlation of two 1D cost volumes over a spatial window and a curve shift:
/// score(y, x)[(i, j, h)] = (1/D) sum_d c1(y, x, d) c2(y + i, x + j, d + h).
template <typename T>
CostVolume<T> corr3d(const CostVolume<T>& c1, const CostVolume<T>& c2, const CorrConfig& cfg);

enum class CorrMode { OneD, TwoD, ThreeD };

/// Plain nested-loop evaluation of the three layers, for verification. For
/// ThreeD, `a` and `b` are the two 1D volumes' score tensors.
CostVolume<double> corr_reference(CorrMode mode, const Tensor<double>& a, const Tensor<double>& b,
                                  const CorrConfig& cfg);

struct CurveShift {
    int shift = 0;
    bool degenerate = false;
    std::vector<double> scores;  // index h + r
};

/// Shift h in [-r, r] maximising (1/D) sum_d curve1[d] curve2[d + h]. Ties go
/// to the smaller |h|, then to the negative side. Zero curves are degenerate.
CurveShift best_curve_shift(std::span<const double> curve1, std::span<const double> curve2, int r);

/// Stacked correlation channels of a single-scale design with large search
/// ranges: (flow_range / stride)^2 flow features, two 1D volumes of
/// 2 disp_range + 1, and when rz is set a 3D volume of
/// (flow_range / stride)^2 (2 rz + 1).
int64_t feature_count(int flow_range, int disp_range, int stride, std::optional<int> rz);

/// Two whitespace-separated columns (displacement, score) for plotting.
void write_curve(std::ostream& out, std::span<const double> scores, int first_displacement);

}  // namespace dwarf
