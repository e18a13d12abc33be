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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "dwarf/data.hpp"
#include "scene_checks.hpp"

using namespace dwarf;

namespace {

SceneSpec static_spec() {
    SceneSpec spec;
    spec.width = 96;
    spec.height = 64;
    spec.background_seed = 3;
    spec.background_d1 = spec.background_d2 = 2;
    spec.objects.push_back({20, 16, 30, 24, 9, 8, 0, 0, 8});
    return spec;
}

// Integer shift (sx, sy) in [-r, r]^2 minimising the SSD between a patch of
// `a` at (x0, y0) and `b` at the shifted position.
std::pair<int, int> best_shift(const Tensor<float>& a, const Tensor<float>& b, int x0, int y0, int size, int r) {
    double best = std::numeric_limits<double>::max();
    std::pair<int, int> arg{0, 0};
    for (int sy = -r; sy <= r; ++sy)
        for (int sx = -r; sx <= r; ++sx) {
            double ssd = 0;
            for (int y = y0; y < y0 + size; ++y)
                for (int x = x0; x < x0 + size; ++x)
                    for (int c = 0; c < 3; ++c) {
                        const double d = a.at(0, c, y, x) - b.at(0, c, y + sy, x + sx);
                        ssd += d * d;
                    }
            if (ssd < best) {
                best = ssd;
                arg = {sx, sy};
            }
        }
    return arg;
}

bool bit_equal(const Tensor<float>& a, const Tensor<float>& b) {
    return a.shape() == b.shape() && std::memcmp(a.ptr(), b.ptr(), a.data().size_bytes()) == 0;
}

}  // namespace

TEST_SUITE("scene generation") {
    TEST_CASE("static scene") {
        auto s = generate_scene(static_spec(), 1);
        for (float v : s.gt.flow.data()) CHECK(v == 0.0f);
        CHECK(bit_equal(s.gt.change, s.gt.disparity));
        CHECK(s.l1.shape() == Shape{1, 3, 64, 96});
        CHECK(bit_equal(s.l1, s.l2));
        for (float v : s.gt.mask.data()) CHECK(v == 1.0f);
    }

    TEST_CASE("moving object ground truth matches the rendering") {
        SceneSpec spec = static_spec();
        spec.objects[0] = {30, 16, 30, 24, 9, 8, 3, 0, 6};
        auto s = generate_scene(spec, 1);
        // Centre of the footprint in L1.
        CHECK(s.gt.flow.at(0, 0, 28, 45) == 3.0f);
        CHECK(s.gt.flow.at(0, 1, 28, 45) == 0.0f);
        CHECK(s.gt.disparity.at(0, 0, 28, 45) == 8.0f);
        CHECK(s.gt.change.at(0, 0, 28, 45) == 6.0f);
        // Patch matching on the rendered views recovers the same displacements.
        CHECK(best_shift(s.l1, s.l2, 38, 20, 8, 6) == std::pair<int, int>{3, 0});
        CHECK(best_shift(s.l1, s.r1, 38, 20, 8, 10) == std::pair<int, int>{-8, 0});
        CHECK(best_shift(s.l1, s.r2, 38, 20, 8, 10) == std::pair<int, int>{3 - 6, 0});
    }

    TEST_CASE("approaching object") {
        SceneSpec spec = static_spec();
        spec.objects[0].d2 = 10;
        auto s = generate_scene(spec, 2);
        CHECK(s.gt.change.at(0, 0, 28, 35) > s.gt.disparity.at(0, 0, 28, 35));
    }

    TEST_CASE("deterministic per spec and seed") {
        auto spec = random_scene_spec(128, 64, 4, 17);
        auto a = generate_scene(spec, 5), b = generate_scene(spec, 5), c = generate_scene(spec, 6);
        CHECK(bit_equal(a.l1, b.l1));
        CHECK(bit_equal(a.r2, b.r2));
        CHECK(bit_equal(a.gt.flow, b.gt.flow));
        CHECK_FALSE(bit_equal(a.l1, c.l1));
        auto spec2 = random_scene_spec(128, 64, 4, 17);
        CHECK(spec2.objects.size() == 4);
        CHECK(spec2.objects[0].d1 == spec.objects[0].d1);
    }

    TEST_CASE("object leaving the frame keeps valid ground truth") {
        SceneSpec spec = static_spec();
        spec.objects[0] = {70, 16, 20, 24, 9, 6, 40, 0, 6};
        auto s = generate_scene(spec, 3);
        CHECK(s.gt.mask.at(0, 0, 28, 80) == 1.0f);
        CHECK(s.gt.flow.at(0, 0, 28, 80) == 40.0f);
        CHECK(80 + 40 >= spec.width);
        CHECK(s.gt.noc.at(0, 0, 28, 80) == 0.0f);
    }

    TEST_CASE("warping by ground truth reconstructs L1") {
        for (uint64_t seed = 0; seed < 5; ++seed) {
            auto s = generate_scene(random_scene_spec(128, 64, 4, 100 + seed), seed);
            auto r = checks::reconstruction_error(s);
            CAPTURE(seed);
            CHECK(r.pixels > 1000);
            CHECK(r.r1 < 0.02);
            CHECK(r.l2 < 0.02);
            CHECK(r.r2 < 0.02);
        }
    }
}

TEST_SUITE("proxy labels") {
    SceneFlowField constant_field(int64_t h, int64_t w, float value) {
        return {Tensor<float>::full({1, 2, h, w}, value), Tensor<float>::full({1, 1, h, w}, value),
                Tensor<float>::full({1, 1, h, w}, value), Tensor<float>::full({1, 1, h, w}, 1.0f), Tensor<float>()};
    }

    TEST_CASE("no noise reproduces the ground truth") {
        auto gt = constant_field(16, 16, 7.0f);
        NoiseSpec n;
        n.sigma_flow = n.sigma_disparity = n.sigma_change = 0;
        n.outlier_rate = 0;
        auto px = make_proxy(gt, n);
        CHECK(bit_equal(px.flow, gt.flow));
        CHECK(bit_equal(px.disparity, gt.disparity));
        CHECK(bit_equal(px.change, gt.change));
        CHECK(bit_equal(px.mask, gt.mask));
    }

    TEST_CASE("gaussian noise has the folded-normal mean deviation") {
        auto gt = constant_field(256, 512, 50.0f);
        NoiseSpec n;
        n.sigma_flow = n.sigma_disparity = n.sigma_change = 0.5;
        n.outlier_rate = 0;
        n.seed = 11;
        auto px = make_proxy(gt, n);
        const double expected = 0.5 * std::sqrt(2.0 / M_PI);
        CHECK(expected == doctest::Approx(0.399).epsilon(0.001));
        for (const auto* t : {&px.flow, &px.disparity, &px.change}) {
            double mad = 0;
            for (float v : t->data()) mad += std::abs(v - 50.0);
            mad /= static_cast<double>(t->numel());
            CHECK(std::abs(mad / expected - 1.0) < 0.05);
        }
    }

    TEST_CASE("outlier patches cover roughly the requested fraction") {
        for (uint64_t seed = 0; seed < 8; ++seed) {
            auto gt = constant_field(64, 128, 20.0f);
            NoiseSpec n;
            n.sigma_flow = n.sigma_disparity = n.sigma_change = 0;
            n.outlier_rate = 0.1;
            n.seed = seed;
            auto px = make_proxy(gt, n);
            int64_t corrupted = 0;
            for (int64_t y = 0; y < 64; ++y)
                for (int64_t x = 0; x < 128; ++x) corrupted += px.disparity.at(0, 0, y, x) != 20.0f;
            const double fraction = static_cast<double>(corrupted) / (64.0 * 128.0);
            CAPTURE(seed);
            CHECK(fraction >= 0.05);
            CHECK(fraction <= 0.15);
        }
    }

    TEST_CASE("disparities stay non-negative") {
        auto gt = constant_field(32, 32, 0.2f);
        NoiseSpec n;
        n.sigma_disparity = n.sigma_change = 2.0;
        auto px = make_proxy(gt, n);
        for (float v : px.disparity.data()) CHECK(v >= 0.0f);
        for (float v : px.change.data()) CHECK(v >= 0.0f);
    }
}
