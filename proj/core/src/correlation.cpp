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

#include "dwarf/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

namespace dwarf {

namespace {

struct Displacement {
    int i, j, h;
};

std::vector<Displacement> displacements(int ry, int rx, int rz) {
    std::vector<Displacement> out;
    for (int i = -ry; i <= ry; ++i)
        for (int j = -rx; j <= rx; ++j)
            for (int h = -rz; h <= rz; ++h) out.push_back({i, j, h});
    return out;
}

// For every displacement o and batch item:
//   out[o](y, x) = inv * sum_d a[d](y, x) * b[d + h](y + i, x + j)
// with out-of-range terms skipped. Row-major inner loop over x.
template <typename T>
void displaced_products(const T* a, const T* b, int64_t depth, int64_t height, int64_t width,
                        const std::vector<Displacement>& disp, T inv, T* out) {
    const int64_t plane = height * width;
    for (size_t o = 0; o < disp.size(); ++o) {
        const auto [i, j, h] = disp[o];
        T* dst = out + static_cast<int64_t>(o) * plane;
        const int64_t d0 = std::max<int64_t>(0, -h), d1 = std::min<int64_t>(depth, depth - h);
        const int64_t y0 = std::max<int64_t>(0, -i), y1 = std::min<int64_t>(height, height - i);
        const int64_t x0 = std::max<int64_t>(0, -j), x1 = std::min<int64_t>(width, width - j);
        for (int64_t d = d0; d < d1; ++d) {
            const T* pa = a + d * plane;
            const T* pb = b + (d + h) * plane;
            for (int64_t y = y0; y < y1; ++y) {
                const T* ra = pa + y * width;
                const T* rb = pb + (y + i) * width + j;
                T* ro = dst + y * width;
                for (int64_t x = x0; x < x1; ++x) ro[x] += ra[x] * rb[x];
            }
        }
        for (int64_t k = 0; k < plane; ++k) dst[k] *= inv;
    }
}

template <typename T>
void displaced_products_backward(const T* a, const T* b, const T* g, int64_t depth, int64_t height, int64_t width,
                                 const std::vector<Displacement>& disp, T inv, T* ga, T* gb) {
    const int64_t plane = height * width;
    for (size_t o = 0; o < disp.size(); ++o) {
        const auto [i, j, h] = disp[o];
        const T* go = g + static_cast<int64_t>(o) * plane;
        const int64_t d0 = std::max<int64_t>(0, -h), d1 = std::min<int64_t>(depth, depth - h);
        const int64_t y0 = std::max<int64_t>(0, -i), y1 = std::min<int64_t>(height, height - i);
        const int64_t x0 = std::max<int64_t>(0, -j), x1 = std::min<int64_t>(width, width - j);
        for (int64_t d = d0; d < d1; ++d) {
            for (int64_t y = y0; y < y1; ++y) {
                const T* rg = go + y * width;
                const int64_t ia = d * plane + y * width;
                const int64_t ib = (d + h) * plane + (y + i) * width + j;
                if (ga)
                    for (int64_t x = x0; x < x1; ++x) ga[ia + x] += inv * rg[x] * b[ib + x];
                if (gb)
                    for (int64_t x = x0; x < x1; ++x) gb[ib + x] += inv * rg[x] * a[ia + x];
            }
        }
    }
}

template <typename T>
Tensor<T> correlate(const Tensor<T>& a, const Tensor<T>& b, int ry, int rx, int rz, bool normalize, const char* name) {
    const Shape& s = a.shape();
    const auto disp = displacements(ry, rx, rz);
    const Shape os{s.n, static_cast<int64_t>(disp.size()), s.h, s.w};
    const T inv = normalize && s.c > 0 ? T(1) / static_cast<T>(s.c) : T(1);
    std::vector<T> out(static_cast<size_t>(os.numel()), T(0));
    for (int64_t n = 0; n < s.n; ++n)
        displaced_products(a.ptr() + n * s.c * s.plane(), b.ptr() + n * s.c * s.plane(), s.c, s.h, s.w, disp, inv,
                           out.data() + n * os.c * os.plane());
    return make_result<T>(os, std::move(out), name, {a, b}, [a, b, disp, inv, os](const TensorImpl<T>& o) {
        const Shape& s = a.shape();
        T* ga = a.requires_grad() ? a.impl()->grad_buffer().data() : nullptr;
        T* gb = b.requires_grad() ? b.impl()->grad_buffer().data() : nullptr;
        for (int64_t n = 0; n < s.n; ++n) {
            const int64_t off = n * s.c * s.plane();
            displaced_products_backward(a.ptr() + off, b.ptr() + off, o.grad.data() + n * os.c * os.plane(), s.c, s.h,
                                        s.w, disp, inv, ga ? ga + off : nullptr, gb ? gb + off : nullptr);
        }
    });
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ShapeError(what);
}

void require_radii(const CorrConfig& cfg) {
    require(cfg.rx >= 0 && cfg.ry >= 0 && cfg.rz >= 0, "correlation radii must be non-negative");
}

}  // namespace

int64_t displacement_count(std::span<const int> radii) {
    int64_t n = 1;
    for (int r : radii) n *= 2 * r + 1;
    return n;
}

template <typename T>
CostVolume<T> corr1d(const Tensor<T>& a, const Tensor<T>& b, const CorrConfig& cfg) {
    require_radii(cfg);
    require(a.shape() == b.shape(), "corr1d: feature shapes differ " + a.shape().str() + " vs " + b.shape().str());
    return {correlate(a, b, 0, cfg.rx, 0, cfg.normalize, "corr1d"), {cfg.rx}};
}

template <typename T>
CostVolume<T> corr2d(const Tensor<T>& a, const Tensor<T>& b, const CorrConfig& cfg) {
    require_radii(cfg);
    require(a.shape() == b.shape(), "corr2d: feature shapes differ " + a.shape().str() + " vs " + b.shape().str());
    return {correlate(a, b, cfg.ry, cfg.rx, 0, cfg.normalize, "corr2d"), {cfg.ry, cfg.rx}};
}

template <typename T>
CostVolume<T> corr3d(const CostVolume<T>& c1, const CostVolume<T>& c2, const CorrConfig& cfg) {
    require_radii(cfg);
    require(c1.radii.size() == 1 && c2.radii.size() == 1, "corr3d: inputs must be 1D cost volumes");
    require(c1.curve_length() == c2.curve_length(),
            "corr3d: curve lengths differ (" + std::to_string(c1.curve_length()) + " vs " +
                std::to_string(c2.curve_length()) + ")");
    require(c1.scores.shape() == c2.scores.shape(), "corr3d: volume shapes differ " + c1.scores.shape().str() +
                                                         " vs " + c2.scores.shape().str());
    return {correlate(c1.scores, c2.scores, cfg.ry, cfg.rx, cfg.rz, cfg.normalize, "corr3d"), {cfg.ry, cfg.rx, cfg.rz}};
}

CostVolume<double> corr_reference(CorrMode mode, const Tensor<double>& a, const Tensor<double>& b,
                                  const CorrConfig& cfg) {
    const Shape& s = a.shape();
    require(a.shape() == b.shape(), "corr_reference: input shapes differ");
    const int ry = mode == CorrMode::OneD ? 0 : cfg.ry;
    const int rz = mode == CorrMode::ThreeD ? cfg.rz : 0;
    const int rx = cfg.rx;
    std::vector<int> radii = mode == CorrMode::OneD   ? std::vector<int>{rx}
                             : mode == CorrMode::TwoD ? std::vector<int>{ry, rx}
                                                      : std::vector<int>{ry, rx, rz};
    const int64_t nd = (2 * ry + 1) * (2 * rx + 1) * (2 * rz + 1);
    auto out = Tensor<double>::zeros({s.n, nd, s.h, s.w});
    for (int64_t n = 0; n < s.n; ++n)
        for (int64_t y = 0; y < s.h; ++y)
            for (int64_t x = 0; x < s.w; ++x) {
                int64_t channel = 0;
                for (int i = -ry; i <= ry; ++i)
                    for (int j = -rx; j <= rx; ++j)
                        for (int h = -rz; h <= rz; ++h, ++channel) {
                            const int64_t y2 = y + i, x2 = x + j;
                            double acc = 0.0;
                            if (y2 >= 0 && y2 < s.h && x2 >= 0 && x2 < s.w) {
                                for (int64_t d = 0; d < s.c; ++d) {
                                    const int64_t d2 = d + h;
                                    if (d2 < 0 || d2 >= s.c) continue;
                                    acc += a.at(n, d, y, x) * b.at(n, d2, y2, x2);
                                }
                            }
                            out.at(n, channel, y, x) = cfg.normalize ? acc / static_cast<double>(s.c) : acc;
                        }
            }
    return {out, radii};
}

CurveShift best_curve_shift(std::span<const double> curve1, std::span<const double> curve2, int r) {
    if (curve1.size() != curve2.size()) throw ShapeError("best_curve_shift: curves differ in length");
    const int64_t len = static_cast<int64_t>(curve1.size());
    if (r < 0 || r >= len) throw ShapeError("best_curve_shift: radius must lie in [0, length)");
    CurveShift result;
    result.scores.assign(static_cast<size_t>(2 * r + 1), 0.0);
    bool all_zero = true;
    for (int h = -r; h <= r; ++h) {
        double acc = 0.0;
        for (int64_t d = 0; d < len; ++d) {
            const int64_t d2 = d + h;
            if (d2 >= 0 && d2 < len) acc += curve1[static_cast<size_t>(d)] * curve2[static_cast<size_t>(d2)];
        }
        result.scores[static_cast<size_t>(h + r)] = acc / static_cast<double>(len);
    }
    for (size_t d = 0; d < curve1.size(); ++d) all_zero = all_zero && curve1[d] == 0.0 && curve2[d] == 0.0;
    if (all_zero) {
        result.degenerate = true;
        return result;
    }
    // Visit 0, -1, +1, -2, +2, ... and keep the first strict maximum.
    double best = result.scores[static_cast<size_t>(r)];
    for (int m = 1; m <= r; ++m)
        for (int h : {-m, m}) {
            const double s = result.scores[static_cast<size_t>(h + r)];
            if (s > best) {
                best = s;
                result.shift = h;
            }
        }
    return result;
}

int64_t feature_count(int flow_range, int disp_range, int stride, std::optional<int> rz) {
    if (flow_range <= 0 || disp_range <= 0 || stride <= 0) throw std::invalid_argument("feature_count: ranges must be positive");
    const int64_t flow_side = flow_range / stride;
    const int64_t flow = flow_side * flow_side;
    const int64_t disp = 2 * static_cast<int64_t>(disp_range) + 1;
    int64_t total = flow + 2 * disp;
    if (rz) total += flow * (2 * static_cast<int64_t>(*rz) + 1);
    return total;
}

void write_curve(std::ostream& out, std::span<const double> scores, int first_displacement) {
    for (size_t k = 0; k < scores.size(); ++k) out << first_displacement + static_cast<int>(k) << ' ' << scores[k] << '\n';
}

template CostVolume<float> corr1d(const Tensor<float>&, const Tensor<float>&, const CorrConfig&);
template CostVolume<double> corr1d(const Tensor<double>&, const Tensor<double>&, const CorrConfig&);
template CostVolume<float> corr2d(const Tensor<float>&, const Tensor<float>&, const CorrConfig&);
template CostVolume<double> corr2d(const Tensor<double>&, const Tensor<double>&, const CorrConfig&);
template CostVolume<float> corr3d(const CostVolume<float>&, const CostVolume<float>&, const CorrConfig&);
template CostVolume<double> corr3d(const CostVolume<double>&, const CostVolume<double>&, const CorrConfig&);

}  // namespace dwarf
