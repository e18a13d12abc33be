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

#include "dwarf/warp.hpp"

#include <cmath>
#include <string>

#include "dwarf/ops.hpp"

namespace dwarf {

template <typename T>
Tensor<T> bilinear_sample(const Tensor<T>& src, const Tensor<T>& coords) {
    const Shape& ss = src.shape();
    const Shape& cs = coords.shape();
    if (cs.c != 2 || cs.n != ss.n)
        throw ShapeError("bilinear_sample: coords " + cs.str() + " must be (N, 2, H, W) for source " + ss.str());
    const Shape os{ss.n, ss.c, cs.h, cs.w};
    std::vector<T> out(static_cast<size_t>(os.numel()), T(0));
    const int64_t sp = ss.plane(), op = os.plane();
    for (int64_t n = 0; n < ss.n; ++n) {
        const T* cx = coords.ptr() + n * 2 * op;
        const T* cy = cx + op;
        for (int64_t p = 0; p < op; ++p) {
            const T x = cx[p], y = cy[p];
            const T xf = std::floor(x), yf = std::floor(y);
            const int64_t x0 = static_cast<int64_t>(xf), y0 = static_cast<int64_t>(yf);
            const T fx = x - xf, fy = y - yf;
            const T w[4] = {(T(1) - fx) * (T(1) - fy), fx * (T(1) - fy), (T(1) - fx) * fy, fx * fy};
            const int64_t xs[4] = {x0, x0 + 1, x0, x0 + 1};
            const int64_t ys[4] = {y0, y0, y0 + 1, y0 + 1};
            for (int k = 0; k < 4; ++k) {
                if (xs[k] < 0 || xs[k] >= ss.w || ys[k] < 0 || ys[k] >= ss.h) continue;
                const int64_t at = ys[k] * ss.w + xs[k];
                for (int64_t c = 0; c < ss.c; ++c)
                    out[static_cast<size_t>((n * ss.c + c) * op + p)] += w[k] * src.ptr()[(n * ss.c + c) * sp + at];
            }
        }
    }
    return make_result<T>(os, std::move(out), "bilinear_sample", {src, coords}, [src, coords](const TensorImpl<T>& o) {
        const Shape& ss = src.shape();
        const Shape& cs = coords.shape();
        const int64_t sp = ss.plane(), op = cs.plane();
        T* gs = src.requires_grad() ? src.impl()->grad_buffer().data() : nullptr;
        T* gc = coords.requires_grad() ? coords.impl()->grad_buffer().data() : nullptr;
        for (int64_t n = 0; n < ss.n; ++n) {
            const T* cx = coords.ptr() + n * 2 * op;
            const T* cy = cx + op;
            for (int64_t p = 0; p < op; ++p) {
                const T x = cx[p], y = cy[p];
                const T xf = std::floor(x), yf = std::floor(y);
                const int64_t x0 = static_cast<int64_t>(xf), y0 = static_cast<int64_t>(yf);
                const T fx = x - xf, fy = y - yf;
                const T w[4] = {(T(1) - fx) * (T(1) - fy), fx * (T(1) - fy), (T(1) - fx) * fy, fx * fy};
                const int64_t xs[4] = {x0, x0 + 1, x0, x0 + 1};
                const int64_t ys[4] = {y0, y0, y0 + 1, y0 + 1};
                bool inside[4];
                for (int k = 0; k < 4; ++k) inside[k] = xs[k] >= 0 && xs[k] < ss.w && ys[k] >= 0 && ys[k] < ss.h;
                T dx = 0, dy = 0;
                for (int64_t c = 0; c < ss.c; ++c) {
                    const T g = o.grad[static_cast<size_t>((n * ss.c + c) * op + p)];
                    if (g == T(0)) continue;
                    const int64_t base = (n * ss.c + c) * sp;
                    T v[4];
                    for (int k = 0; k < 4; ++k) {
                        v[k] = inside[k] ? src.ptr()[base + ys[k] * ss.w + xs[k]] : T(0);
                        if (gs && inside[k]) gs[base + ys[k] * ss.w + xs[k]] += g * w[k];
                    }
                    dx += g * ((T(1) - fy) * (v[1] - v[0]) + fy * (v[3] - v[2]));
                    dy += g * ((T(1) - fx) * (v[2] - v[0]) + fx * (v[3] - v[1]));
                }
                if (gc) {
                    gc[n * 2 * op + p] += dx;
                    gc[n * 2 * op + op + p] += dy;
                }
            }
        }
    });
}

template <typename T>
Tensor<T> identity_grid(int64_t n, int64_t h, int64_t w) {
    auto g = Tensor<T>::zeros({n, 2, h, w});
    for (int64_t b = 0; b < n; ++b)
        for (int64_t y = 0; y < h; ++y)
            for (int64_t x = 0; x < w; ++x) {
                g.at(b, 0, y, x) = static_cast<T>(x);
                g.at(b, 1, y, x) = static_cast<T>(y);
            }
    return g;
}

template <typename T>
Tensor<T> warp_by_flow(const Tensor<T>& src, const Tensor<T>& flow) {
    const Shape& fs = flow.shape();
    if (fs.c != 2) throw ShapeError("warp_by_flow: flow must have 2 channels, got " + fs.str());
    if (fs.n != src.shape().n || fs.h != src.shape().h || fs.w != src.shape().w)
        throw ShapeError("warp_by_flow: flow " + fs.str() + " does not cover source " + src.shape().str());
    return bilinear_sample(src, add(identity_grid<T>(fs.n, fs.h, fs.w), flow));
}

template <typename T>
Tensor<T> warp_by_disparity(const Tensor<T>& src, const Tensor<T>& disparity) {
    const Shape& ds = disparity.shape();
    if (ds.c != 1) throw ShapeError("warp_by_disparity: disparity must have 1 channel, got " + ds.str());
    auto displacement = concat_channels<T>({scale(disparity, T(-1)), Tensor<T>::zeros(ds)});
    return warp_by_flow(src, displacement);
}

template <typename T>
Tensor<T> warp_by_flow_and_change(const Tensor<T>& src, const Tensor<T>& flow, const Tensor<T>& change) {
    const Shape& cs = change.shape();
    if (cs.c != 1) throw ShapeError("warp_by_flow_and_change: change must have 1 channel, got " + cs.str());
    if (flow.shape().c != 2) throw ShapeError("warp_by_flow_and_change: flow must have 2 channels");
    auto displacement = add(flow, concat_channels<T>({scale(change, T(-1)), Tensor<T>::zeros(cs)}));
    return warp_by_flow(src, displacement);
}

template <typename T>
Tensor<T> scale_prior(const Tensor<T>& estimate, int level) {
    return scale(bilinear_upsample(estimate, 2), static_cast<T>(prior_to_pixels(level)));
}

#define DWARF_INSTANTIATE_WARP(T)                                                                        \
    template Tensor<T> bilinear_sample(const Tensor<T>&, const Tensor<T>&);                              \
    template Tensor<T> warp_by_flow(const Tensor<T>&, const Tensor<T>&);                                 \
    template Tensor<T> warp_by_disparity(const Tensor<T>&, const Tensor<T>&);                            \
    template Tensor<T> warp_by_flow_and_change(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);    \
    template Tensor<T> scale_prior(const Tensor<T>&, int);                                               \
    template Tensor<T> identity_grid(int64_t, int64_t, int64_t);

DWARF_INSTANTIATE_WARP(float)
DWARF_INSTANTIATE_WARP(double)

}  // namespace dwarf
