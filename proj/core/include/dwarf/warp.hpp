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

#include "dwarf/tensor.hpp"

namespace dwarf {

/// Predictions are carried in ground-truth units divided by this factor.
inline constexpr double kFlowScale = 20.0;

/// Conversion from scaled prediction units to pixels at pyramid level k:
/// 20 / 2^k.
constexpr double prior_to_pixels(int level) { return kFlowScale / static_cast<double>(1 << level); }

/// Bilinear read of `src` at per-pixel source coordinates. `coords` is
/// (N, 2, H, W) holding x then y in source pixel units. Corners outside the
/// source contribute zero. Differentiable w.r.t. both arguments.
template <typename T>
Tensor<T> bilinear_sample(const Tensor<T>& src, const Tensor<T>& coords);

/// Backward warp: out(p) = src(p + flow(p)); flow is (u, v) in pixels.
template <typename T>
Tensor<T> warp_by_flow(const Tensor<T>& src, const Tensor<T>& flow);

/// Right-to-left warp with left-reference disparity: out(x) = src(x - d(x)).
template <typename T>
Tensor<T> warp_by_disparity(const Tensor<T>& src, const Tensor<T>& disparity);

/// Warp of the second right view into first-left coordinates:
/// out(p) = src(p + (u(p) - change(p), v(p))).
template <typename T>
Tensor<T> warp_by_flow_and_change(const Tensor<T>& src, const Tensor<T>& flow, const Tensor<T>& change);

/// Upsamples a level k+1 estimate by 2 (bilinear) and converts it to level-k
/// pixel displacements.
template <typename T>
Tensor<T> scale_prior(const Tensor<T>& estimate, int level);

/// (N, 2, H, W) grid holding each pixel's own (x, y).
template <typename T>
Tensor<T> identity_grid(int64_t n, int64_t h, int64_t w);

}  // namespace dwarf
