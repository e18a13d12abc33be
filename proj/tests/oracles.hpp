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

// Independent reference implementations used only by tests. They follow the
// textbook definitions with plain nested loops and share no code with the
// library kernels.

#include <cstdint>
#include <random>
#include <vector>

#include "dwarf/tensor.hpp"

namespace oracle {

template <typename T>
dwarf::Tensor<T> random_tensor(dwarf::Shape s, uint64_t seed, double lo = -1.0, double hi = 1.0,
                               bool requires_grad = false) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<T> v(static_cast<size_t>(s.numel()));
    for (auto& x : v) x = static_cast<T>(u(rng));
    return dwarf::Tensor<T>::from(s, std::move(v), requires_grad);
}

/// Direct cross-correlation with zero padding, stride and dilation.
inline std::vector<double> conv2d(const dwarf::Tensor<double>& x, const dwarf::Tensor<double>& w,
                                  const std::vector<double>& bias, int stride, int dilation, int pad, int64_t& oh,
                                  int64_t& ow) {
    const auto& xs = x.shape();
    const auto& ws = w.shape();
    const int64_t k = ws.h;
    oh = (xs.h + 2 * pad - dilation * (k - 1) - 1) / stride + 1;
    ow = (xs.w + 2 * pad - dilation * (k - 1) - 1) / stride + 1;
    std::vector<double> out(static_cast<size_t>(xs.n * ws.n * oh * ow), 0.0);
    for (int64_t n = 0; n < xs.n; ++n)
        for (int64_t co = 0; co < ws.n; ++co)
            for (int64_t y = 0; y < oh; ++y)
                for (int64_t xx = 0; xx < ow; ++xx) {
                    double acc = bias.empty() ? 0.0 : bias[static_cast<size_t>(co)];
                    for (int64_t ci = 0; ci < xs.c; ++ci)
                        for (int64_t ky = 0; ky < k; ++ky)
                            for (int64_t kx = 0; kx < k; ++kx) {
                                const int64_t iy = y * stride - pad + ky * dilation;
                                const int64_t ix = xx * stride - pad + kx * dilation;
                                if (iy < 0 || iy >= xs.h || ix < 0 || ix >= xs.w) continue;
                                acc += x.at(n, ci, iy, ix) * w.at(co, ci, ky, kx);
                            }
                    out[static_cast<size_t>(((n * ws.n + co) * oh + y) * ow + xx)] = acc;
                }
    return out;
}

}  // namespace oracle
