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

#include <vector>

#include "dwarf/tensor.hpp"

namespace dwarf {

struct ConvGeometry {
    int stride = 1;
    int dilation = 1;
    int padding = 0;
};

/// Output extent of a convolution along one axis.
constexpr int64_t conv_out_size(int64_t in, int64_t kernel, const ConvGeometry& g) {
    return (in + 2 * g.padding - g.dilation * (kernel - 1) - 1) / g.stride + 1;
}

/// Cross-correlation with weight (C_out, C_in, k, k). `bias` may be undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, ConvGeometry geom);

/// Transposed convolution with weight (C_in, C_out, k, k); the adjoint of
/// conv2d with the same geometry. Output extent (H-1)*stride - 2*padding + k.
template <typename T>
Tensor<T> conv2d_transpose(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int stride,
                           int padding = 1);

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T alpha);

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts);

/// Channels [begin, end) of x.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, int64_t begin, int64_t end);

/// Bilinear resize by an integer factor, half-pixel (align_corners=false)
/// sampling with edge clamping.
template <typename T>
Tensor<T> bilinear_upsample(const Tensor<T>& x, int factor);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);
/// Σ x² as a scalar.
template <typename T>
Tensor<T> sum_squares(const Tensor<T>& x);
/// Σ |x| as a scalar.
template <typename T>
Tensor<T> sum_abs(const Tensor<T>& x);
/// Σ x·w with a constant weight tensor of the same shape.
template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& x, const Tensor<T>& weights);

/// Σ over pixels with mask != 0 of Σ_c |pred - target|. `target` and `mask`
/// are constants; mask has one channel and broadcasts over channels.
template <typename T>
Tensor<T> masked_l1(const Tensor<T>& pred, const Tensor<T>& target, const Tensor<T>& mask);

}  // namespace dwarf
