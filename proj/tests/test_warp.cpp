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

#include <cmath>
#include <cstring>

#include "dwarf/gradcheck.hpp"
#include "dwarf/ops.hpp"
#include "dwarf/warp.hpp"
#include "oracles.hpp"

using namespace dwarf;
using TD = Tensor<double>;
using TF = Tensor<float>;

namespace {
TD row(std::vector<double> v) {
    const auto w = static_cast<int64_t>(v.size());
    return TD::from({1, 1, 1, w}, std::move(v));
}

TD constant_flow(int64_t h, int64_t w, double u, double v) {
    auto f = TD::zeros({1, 2, h, w});
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            f.at(0, 0, y, x) = u;
            f.at(0, 1, y, x) = v;
        }
    return f;
}

// Keeps random displacements away from integer sampling positions, where the
// bilinear interpolant has kinks.
void avoid_integer_positions(TD& t) {
    for (auto& v : t.data()) {
        const double frac = v - std::floor(v);
        if (frac < 0.1 || frac > 0.9) v += 0.3;
    }
}
}  // namespace

TEST_SUITE("warp") {
    TEST_CASE("identity grid reproduces the source") {
        auto src = oracle::random_tensor<float>({2, 3, 5, 7}, 1);
        auto out = bilinear_sample(src, identity_grid<float>(2, 5, 7));
        CHECK(std::memcmp(out.ptr(), src.ptr(), src.data().size_bytes()) == 0);
    }

    TEST_CASE("integer and half-pixel shifts with zero fill") {
        auto src = row({1, 2, 3});
        auto g = identity_grid<double>(1, 1, 3);
        for (int64_t x = 0; x < 3; ++x) g.at(0, 0, 0, x) += 1.0;
        auto out = bilinear_sample(src, g);
        CHECK(out.data()[0] == 2.0);
        CHECK(out.data()[1] == 3.0);
        CHECK(out.data()[2] == 0.0);

        for (int64_t x = 0; x < 3; ++x) g.at(0, 0, 0, x) -= 0.5;
        out = bilinear_sample(src, g);
        CHECK(out.data()[0] == doctest::Approx(1.5));
        CHECK(out.data()[1] == doctest::Approx(2.5));
        CHECK(out.data()[2] == doctest::Approx(1.5));
    }

    TEST_CASE("warp_by_flow") {
        auto src = row({1, 2, 3});
        auto same = warp_by_flow(src, constant_flow(1, 3, 0, 0));
        CHECK(std::memcmp(same.ptr(), src.ptr(), src.data().size_bytes()) == 0);
        auto out = warp_by_flow(src, constant_flow(1, 3, 1, 0));
        CHECK(out.data()[0] == 2.0);
        CHECK(out.data()[1] == 3.0);
        CHECK(out.data()[2] == 0.0);
        CHECK_THROWS_AS(warp_by_flow(src, TD::zeros({1, 1, 1, 3})), ShapeError);
    }

    TEST_CASE("warp_by_disparity samples at x - d") {
        auto src = row({1, 2, 3});
        auto zero = warp_by_disparity(src, TD::zeros({1, 1, 1, 3}));
        CHECK(std::memcmp(zero.ptr(), src.ptr(), src.data().size_bytes()) == 0);
        auto out = warp_by_disparity(src, TD::full({1, 1, 1, 3}, 1.0));
        CHECK(out.data()[0] == 0.0);
        CHECK(out.data()[1] == 1.0);
        CHECK(out.data()[2] == 2.0);
        // Negative disparity is used as given.
        auto neg = warp_by_disparity(src, TD::full({1, 1, 1, 3}, -1.0));
        CHECK(neg.data()[0] == 2.0);
        CHECK(neg.data()[2] == 0.0);
    }

    TEST_CASE("flow plus disparity change") {
        auto src = oracle::random_tensor<double>({1, 2, 4, 6}, 3);
        auto flow = oracle::random_tensor<double>({1, 2, 4, 6}, 4, -2, 2);
        auto zero = warp_by_flow_and_change(src, flow, TD::zeros({1, 1, 4, 6}));
        auto plain = warp_by_flow(src, flow);
        CHECK(std::memcmp(zero.ptr(), plain.ptr(), plain.data().size_bytes()) == 0);

        auto change = oracle::random_tensor<double>({1, 1, 4, 6}, 5, 0, 3);
        auto composed = warp_by_flow_and_change(src, flow, change);
        auto summed = flow.detach();
        for (int64_t y = 0; y < 4; ++y)
            for (int64_t x = 0; x < 6; ++x) summed.at(0, 0, y, x) = flow.at(0, 0, y, x) + -change.at(0, 0, y, x);
        auto reference = warp_by_flow(src, summed);
        CHECK(std::memcmp(composed.ptr(), reference.ptr(), reference.data().size_bytes()) == 0);

        // Flow (1, 0) with change 1 cancels horizontally.
        auto id = warp_by_flow_and_change(src, constant_flow(4, 6, 1, 0), TD::full({1, 1, 4, 6}, 1.0));
        for (int64_t i = 0; i < src.numel(); ++i) CHECK(id.data()[i] == src.data()[i]);
        CHECK_THROWS_AS(warp_by_flow_and_change(src, flow, TD::zeros({1, 2, 4, 6})), ShapeError);
    }

    TEST_CASE("integer displacements equal shifted arrays") {
        auto src = oracle::random_tensor<double>({1, 1, 5, 6}, 9);
        for (int u = -2; u <= 2; ++u)
            for (int v = -2; v <= 2; ++v) {
                auto out = warp_by_flow(src, constant_flow(5, 6, u, v));
                for (int64_t y = 0; y < 5; ++y)
                    for (int64_t x = 0; x < 6; ++x) {
                        const int64_t sy = y + v, sx = x + u;
                        const double expect = (sy >= 0 && sy < 5 && sx >= 0 && sx < 6) ? src.at(0, 0, sy, sx) : 0.0;
                        CHECK(out.at(0, 0, y, x) == expect);
                    }
            }
    }

    TEST_CASE("gradients w.r.t. source and displacements pass finite differences") {
        auto src = oracle::random_tensor<double>({2, 2, 4, 5}, 21, -1, 1, true);
        auto flow = oracle::random_tensor<double>({2, 2, 4, 5}, 22, -1.5, 1.5, true);
        auto disp = oracle::random_tensor<double>({2, 1, 4, 5}, 23, 0, 2, true);
        auto change = oracle::random_tensor<double>({2, 1, 4, 5}, 24, 0, 2, true);
        avoid_integer_positions(flow);
        avoid_integer_positions(disp);
        // Keep u - change away from integers as well.
        for (int64_t n = 0; n < 2; ++n)
            for (int64_t y = 0; y < 4; ++y)
                for (int64_t x = 0; x < 5; ++x) {
                    const double net = flow.at(n, 0, y, x) - change.at(n, 0, y, x);
                    const double frac = net - std::floor(net);
                    if (frac < 0.1 || frac > 0.9) change.at(n, 0, y, x) += 0.3;
                }

        auto r1 = finite_difference_check(
            [](const std::vector<TD>& in) { return random_projection(warp_by_flow(in[0], in[1]), 1); }, {src, flow});
        CHECK(r1.max_relative_error < 1e-5);
        auto r2 = finite_difference_check(
            [](const std::vector<TD>& in) { return random_projection(warp_by_disparity(in[0], in[1]), 2); },
            {src, disp});
        CHECK(r2.max_relative_error < 1e-5);
        auto r3 = finite_difference_check(
            [](const std::vector<TD>& in) {
                return random_projection(warp_by_flow_and_change(in[0], in[1], in[2]), 3);
            },
            {src, flow, change});
        CHECK(r3.max_relative_error < 1e-5);
    }

    TEST_CASE("scale_prior converts to level pixels") {
        CHECK(prior_to_pixels(5) == 0.625);
        auto zero = scale_prior(TF::zeros({1, 2, 2, 3}), 4);
        CHECK(zero.shape() == Shape{1, 2, 4, 6});
        for (float v : zero.data()) CHECK(v == 0.f);
        auto one = scale_prior(TD::full({1, 1, 2, 2}, 1.0), 5);
        for (double v : one.data()) CHECK(v == doctest::Approx(0.625));
    }
}
