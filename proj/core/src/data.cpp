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

#include "dwarf/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

namespace dwarf {

const char* provenance_token(Provenance p) { return p == Provenance::Gt ? "gt" : "px"; }

namespace {

// Smooth colour texture: a base colour plus six plane waves with wavelengths
// of 6-24 px, phase-shifted per channel. Evaluated analytically, so sub-pixel
// shifts render exactly.
struct Texture {
    std::array<double, 3> base{};
    std::array<double, 6> fx{}, fy{}, amp{};
    std::array<std::array<double, 3>, 6> phase{};

    explicit Texture(uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        for (auto& b : base) b = 0.25 + 0.5 * u01(rng);
        for (size_t i = 0; i < fx.size(); ++i) {
            const double wavelength = 6.0 + 18.0 * u01(rng);
            const double angle = 2.0 * std::numbers::pi * u01(rng);
            fx[i] = std::cos(angle) / wavelength;
            fy[i] = std::sin(angle) / wavelength;
            amp[i] = 0.03 + 0.05 * u01(rng);
            for (auto& p : phase[i]) p = 2.0 * std::numbers::pi * u01(rng);
        }
    }

    float at(double u, double v, int c) const {
        double value = base[static_cast<size_t>(c)];
        for (size_t i = 0; i < fx.size(); ++i)
            value += amp[i] * std::sin(2.0 * std::numbers::pi * (fx[i] * u + fy[i] * v) + phase[i][static_cast<size_t>(c)]);
        return static_cast<float>(std::clamp(value, 0.0, 1.0));
    }
};

struct Layer {
    bool infinite;
    double x, y, w, h;
    double d1, dx, dy, d2;
    Texture texture;

    // Offset of the layer in view v (0 = L1, 1 = R1, 2 = L2, 3 = R2).
    std::array<double, 2> offset(int view) const {
        switch (view) {
            case 1: return {-d1, 0.0};
            case 2: return {dx, dy};
            case 3: return {dx - d2, dy};
            default: return {0.0, 0.0};
        }
    }
    bool covers(double u, double v) const { return infinite || (u >= x && u < x + w && v >= y && v < y + h); }
};

uint64_t mix(uint64_t a, uint64_t b) {
    // splitmix64 finaliser over a combined key.
    uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace

SceneSpec random_scene_spec(int width, int height, int objects, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
    SceneSpec spec;
    spec.width = width;
    spec.height = height;
    spec.background_seed = rng();
    spec.background_d1 = uniform(1.0, 3.0);
    spec.background_dx = uniform(-2.0, 2.0);
    spec.background_dy = uniform(-1.0, 1.0);
    spec.background_d2 = std::max(0.5, spec.background_d1 + uniform(-0.5, 0.5));
    for (int i = 0; i < objects; ++i) {
        SceneObject o;
        o.width = uniform(0.15, 0.4) * width;
        o.height = uniform(0.2, 0.5) * height;
        o.x = uniform(-0.1 * width, width - 0.6 * o.width);
        o.y = uniform(-0.1 * height, height - 0.6 * o.height);
        o.texture_seed = rng();
        o.d1 = uniform(3.0, 12.0);
        o.dx = uniform(-6.0, 6.0);
        o.dy = uniform(-3.0, 3.0);
        o.d2 = std::clamp(o.d1 + uniform(-2.0, 2.0), 1.0, 12.0);
        spec.objects.push_back(o);
    }
    // Nearer objects are drawn last.
    std::stable_sort(spec.objects.begin(), spec.objects.end(),
                     [](const SceneObject& a, const SceneObject& b) { return a.d1 < b.d1; });
    return spec;
}

SceneSample generate_scene(const SceneSpec& spec, uint64_t seed) {
    const int64_t H = spec.height, W = spec.width;
    std::vector<Layer> layers;
    layers.push_back({true, 0, 0, 0, 0, spec.background_d1, spec.background_dx, spec.background_dy,
                      spec.background_d2, Texture(mix(spec.background_seed, seed))});
    for (const auto& o : spec.objects)
        layers.push_back({false, o.x, o.y, o.width, o.height, o.d1, o.dx, o.dy, o.d2, Texture(mix(o.texture_seed, seed))});

    // Per view: rendered colour and the id of the front-most layer.
    std::array<Tensor<float>, 4> views;
    std::array<std::vector<int>, 4> ids;
    for (int view = 0; view < 4; ++view) {
        views[static_cast<size_t>(view)] = Tensor<float>::zeros({1, 3, H, W});
        auto& id = ids[static_cast<size_t>(view)];
        id.assign(static_cast<size_t>(H * W), 0);
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                for (size_t l = layers.size(); l-- > 0;) {
                    const auto off = layers[l].offset(view);
                    const double u = static_cast<double>(x) - off[0], v = static_cast<double>(y) - off[1];
                    if (!layers[l].covers(u, v)) continue;
                    id[static_cast<size_t>(y * W + x)] = static_cast<int>(l);
                    for (int c = 0; c < 3; ++c) views[static_cast<size_t>(view)].at(0, c, y, x) = layers[l].texture.at(u, v, c);
                    break;
                }
            }
    }

    SceneSample s;
    s.l1 = views[0];
    s.r1 = views[1];
    s.l2 = views[2];
    s.r2 = views[3];
    s.provenance = Provenance::Gt;
    s.gt.flow = Tensor<float>::zeros({1, 2, H, W});
    s.gt.disparity = Tensor<float>::zeros({1, 1, H, W});
    s.gt.change = Tensor<float>::zeros({1, 1, H, W});
    s.gt.mask = Tensor<float>::full({1, 1, H, W}, 1.0f);
    s.gt.noc = Tensor<float>::zeros({1, 1, H, W});

    // A correspondence is non-occluded when every bilinear corner around it
    // lies inside the view and shows the same layer.
    auto visible = [&](int view, double px, double py, int layer) {
        const double fx = std::floor(px), fy = std::floor(py);
        for (int dy = 0; dy <= 1; ++dy)
            for (int dx = 0; dx <= 1; ++dx) {
                const int64_t cx = static_cast<int64_t>(fx) + dx, cy = static_cast<int64_t>(fy) + dy;
                if (cx < 0 || cx >= W || cy < 0 || cy >= H) return false;
                if (ids[static_cast<size_t>(view)][static_cast<size_t>(cy * W + cx)] != layer) return false;
            }
        return true;
    };
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x) {
            const int l = ids[0][static_cast<size_t>(y * W + x)];
            const Layer& L = layers[static_cast<size_t>(l)];
            s.gt.flow.at(0, 0, y, x) = static_cast<float>(L.dx);
            s.gt.flow.at(0, 1, y, x) = static_cast<float>(L.dy);
            s.gt.disparity.at(0, 0, y, x) = static_cast<float>(L.d1);
            s.gt.change.at(0, 0, y, x) = static_cast<float>(L.d2);
            const double xd = static_cast<double>(x), yd = static_cast<double>(y);
            const bool noc = visible(1, xd - L.d1, yd, l) && visible(2, xd + L.dx, yd + L.dy, l) &&
                             visible(3, xd + L.dx - L.d2, yd + L.dy, l);
            s.gt.noc.at(0, 0, y, x) = noc ? 1.0f : 0.0f;
        }
    return s;
}

SceneFlowField make_proxy(const SceneFlowField& gt, const NoiseSpec& noise) {
    std::mt19937_64 rng(noise.seed);
    SceneFlowField px{gt.flow.clone(), gt.disparity.clone(), gt.change.clone(), gt.mask.clone(),
                      gt.noc.defined() ? gt.noc.clone() : Tensor<float>()};
    const Shape& s = gt.disparity.shape();
    auto jitter = [&](Tensor<float>& t, double sigma) {
        if (sigma <= 0) return;
        std::normal_distribution<double> n(0.0, sigma);
        for (auto& v : t.data()) v = static_cast<float>(v + n(rng));
    };
    jitter(px.flow, noise.sigma_flow);
    jitter(px.disparity, noise.sigma_disparity);
    jitter(px.change, noise.sigma_change);

    if (noise.outlier_rate > 0) {
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        std::uniform_int_distribution<int> side(noise.patch_min, std::max(noise.patch_min, noise.patch_max));
        std::vector<uint8_t> hit(static_cast<size_t>(s.h * s.w), 0);
        const int64_t target = static_cast<int64_t>(std::llround(noise.outlier_rate * static_cast<double>(s.h * s.w)));
        int64_t covered = 0;
        auto offset = [&]() {
            const double m = noise.outlier_min + (noise.outlier_max - noise.outlier_min) * u01(rng);
            return static_cast<float>(u01(rng) < 0.5 ? -m : m);
        };
        while (covered < target) {
            const int64_t ph = side(rng), pw = side(rng);
            const int64_t y0 = static_cast<int64_t>(u01(rng) * static_cast<double>(s.h));
            const int64_t x0 = static_cast<int64_t>(u01(rng) * static_cast<double>(s.w));
            const float du = offset(), dv = offset(), dd = offset(), dc = offset();
            for (int64_t y = y0; y < std::min(s.h, y0 + ph); ++y)
                for (int64_t x = x0; x < std::min(s.w, x0 + pw); ++x) {
                    auto& h = hit[static_cast<size_t>(y * s.w + x)];
                    if (!h) {
                        h = 1;
                        ++covered;
                    }
                    px.flow.at(0, 0, y, x) += du;
                    px.flow.at(0, 1, y, x) += dv;
                    px.disparity.at(0, 0, y, x) += dd;
                    px.change.at(0, 0, y, x) += dc;
                }
        }
    }
    for (auto* t : {&px.disparity, &px.change})
        for (auto& v : t->data()) v = std::max(v, 0.0f);
    return px;
}

}  // namespace dwarf
