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
#include <limits>

#include "dwarf/adam.hpp"
#include "dwarf/gradcheck.hpp"
#include "dwarf/ops.hpp"
#include "dwarf/params.hpp"
#include "oracles.hpp"

using namespace dwarf;
using TD = Tensor<double>;
using TF = Tensor<float>;

TEST_SUITE("tensor") {
    TEST_CASE("factory shapes and element access") {
        auto t = TF::zeros({2, 3, 4, 5});
        CHECK(t.numel() == 120);
        CHECK(t.data().size() == 120);
        t.at(1, 2, 3, 4) = 7.f;
        CHECK(t.data().back() == 7.f);
        CHECK_THROWS_AS(TF::from({1, 1, 2, 2}, {1.f, 2.f}), ShapeError);
    }

    TEST_CASE("backward of sum gives ones") {
        auto x = oracle::random_tensor<double>({2, 3, 4, 5}, 1, -1, 1, true);
        backward(sum(x));
        for (double g : std::as_const(x).grad()) CHECK(g == 1.0);
    }

    TEST_CASE("backward of sum(x*x) at [1,2] is [2,4]") {
        auto x = TD::from({1, 1, 1, 2}, {1.0, 2.0}, true);
        backward(sum(mul(x, x)));
        CHECK(x.grad()[0] == doctest::Approx(2.0));
        CHECK(x.grad()[1] == doctest::Approx(4.0));
    }

    TEST_CASE("backward rejects non-scalar loss") {
        auto x = TD::zeros({1, 1, 2, 2}, true);
        CHECK_THROWS_AS(backward(scale(x, 2.0)), ShapeError);
    }

    TEST_CASE("a tensor consumed twice receives the sum of both contributions") {
        auto x = oracle::random_tensor<double>({1, 2, 3, 3}, 5, -1, 1, true);
        auto w = oracle::random_tensor<double>({1, 2, 3, 3}, 6);
        backward(add(weighted_sum(leaky_relu(x, 0.1), w), sum_squares(x)));

        auto a = x.detach().set_requires_grad(true);
        auto b = x.detach().set_requires_grad(true);
        backward(add(weighted_sum(leaky_relu(a, 0.1), w), sum_squares(b)));
        for (int64_t i = 0; i < x.numel(); ++i)
            CHECK(x.grad()[static_cast<size_t>(i)] == doctest::Approx(a.grad()[i] + b.grad()[i]).epsilon(1e-14));
    }

    TEST_CASE("topological order visits each node once") {
        auto x = TD::scalar(3.0, true);
        auto y = mul(x, x);
        auto z = add(y, y);
        auto order = topological_order(z);
        CHECK(order.size() == 3);
        CHECK(order.front() == x.impl());
        CHECK(order.back() == z.impl());
    }

    TEST_CASE("no-grad guard suppresses recording") {
        auto x = TD::scalar(1.0, true);
        NoGradGuard guard;
        auto y = scale(x, 2.0);
        CHECK_FALSE(y.requires_grad());
        CHECK(y.grad_fn() == nullptr);
    }
}

TEST_SUITE("conv2d") {
    TEST_CASE("3x3 ones with padding 1 gives 9 at the center") {
        auto x = TF::full({1, 1, 3, 3}, 1.f);
        auto w = TF::full({1, 1, 3, 3}, 1.f);
        auto b = TF::zeros({1, 1, 1, 1});
        auto y = conv2d(x, w, b, {1, 1, 1});
        CHECK(y.shape() == Shape{1, 1, 3, 3});
        CHECK(y.at(0, 0, 1, 1) == 9.f);
        CHECK(y.at(0, 0, 0, 0) == 4.f);
    }

    TEST_CASE("encoder level-1 shape arithmetic") {
        auto x = TF::zeros({1, 3, 256, 512});
        auto w = TF::zeros({16, 3, 3, 3});
        auto y = conv2d(x, w, TF(), {2, 1, 1});
        CHECK(y.shape() == Shape{1, 16, 128, 256});
    }

    TEST_CASE("matches the nested-loop oracle for stride, dilation and padding") {
        struct Case {
            int stride, dilation, pad;
        };
        for (Case c : {Case{1, 2, 2}, Case{1, 1, 1}, Case{2, 1, 1}, Case{1, 2, 0}, Case{2, 2, 3}}) {
            CAPTURE(c.stride);
            CAPTURE(c.dilation);
            auto x = oracle::random_tensor<double>({2, 2, 5, 5}, 11);
            auto w = oracle::random_tensor<double>({3, 2, 3, 3}, 12);
            auto b = oracle::random_tensor<double>({3, 1, 1, 1}, 13);
            auto y = conv2d(x, w, b, {c.stride, c.dilation, c.pad});
            int64_t oh = 0, ow = 0;
            auto ref = oracle::conv2d(x, w, {b.data().begin(), b.data().end()}, c.stride, c.dilation, c.pad, oh, ow);
            REQUIRE(y.shape() == Shape{2, 3, oh, ow});
            for (size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(y.data()[i] - ref[i]) < 1e-6);
        }
    }

    TEST_CASE("shape errors are reported") {
        auto x = TF::zeros({1, 2, 5, 5});
        CHECK_THROWS_AS(conv2d(x, TF::zeros({1, 3, 3, 3}), TF(), {1, 1, 1}), ShapeError);
        CHECK_THROWS_AS(conv2d(x, TF::zeros({1, 2, 7, 7}), TF(), {1, 1, 0}), ShapeError);
        CHECK_THROWS_AS(conv2d(x, TF::zeros({1, 2, 3, 3}), TF(), {0, 1, 1}), ShapeError);
        try {
            conv2d(x, TF::zeros({4, 3, 3, 3}), TF(), {1, 1, 1});
        } catch (const ShapeError& e) {
            CHECK(std::string(e.what()).find("(4, 3, 3, 3)") != std::string::npos);
        }
    }

    TEST_CASE("gradients pass finite differences") {
        for (int dilation : {1, 2}) {
            auto x = oracle::random_tensor<double>({2, 2, 5, 5}, 21, -1, 1, true);
            auto w = oracle::random_tensor<double>({3, 2, 3, 3}, 22, -1, 1, true);
            auto b = oracle::random_tensor<double>({3, 1, 1, 1}, 23, -1, 1, true);
            auto r = finite_difference_check(
                [dilation](const std::vector<TD>& in) {
                    return random_projection(conv2d(in[0], in[1], in[2], {2, dilation, dilation}), 7);
                },
                {x, w, b});
            CHECK(r.max_relative_error < 1e-5);
        }
    }
}

TEST_SUITE("conv2d_transpose") {
    TEST_CASE("stride 2 kernel 4 doubles the extent") {
        auto x = TF::full({1, 1, 2, 2}, 1.f);
        auto w = TF::zeros({1, 1, 4, 4});
        w.at(0, 0, 1, 1) = 1.f;
        auto y = conv2d_transpose(x, w, TF(), 2);
        CHECK(y.shape() == Shape{1, 1, 4, 4});
    }

    TEST_CASE("zero input gives the broadcast bias") {
        auto x = TF::zeros({1, 2, 3, 3});
        auto w = oracle::random_tensor<float>({2, 3, 4, 4}, 3);
        auto b = TF::from({3, 1, 1, 1}, {0.5f, -1.f, 2.f});
        auto y = conv2d_transpose(x, w, b, 2);
        for (int64_t c = 0; c < 3; ++c)
            for (int64_t i = 0; i < 6; ++i)
                for (int64_t j = 0; j < 6; ++j) CHECK(y.at(0, c, i, j) == b.data()[c]);
    }

    TEST_CASE("equals the vector-Jacobian product of the matching conv2d") {
        for (uint64_t seed = 0; seed < 5; ++seed) {
            // conv2d maps (2, 6, 6) -> (3, 3, 3); its adjoint maps (3, 3, 3) -> (2, 6, 6).
            auto w = oracle::random_tensor<double>({3, 2, 4, 4}, 100 + seed);
            auto v = oracle::random_tensor<double>({1, 3, 3, 3}, 200 + seed);
            auto probe = TD::zeros({1, 2, 6, 6}, true);
            backward(weighted_sum(conv2d(probe, w, TD(), {2, 1, 1}), v));
            auto y = conv2d_transpose(v, w, TD(), 2, 1);
            REQUIRE(y.shape() == probe.shape());
            for (int64_t i = 0; i < y.numel(); ++i) CHECK(std::abs(y.data()[i] - probe.grad()[i]) < 1e-6);
        }
    }

    TEST_CASE("gradients pass finite differences") {
        auto x = oracle::random_tensor<double>({2, 2, 3, 3}, 31, -1, 1, true);
        auto w = oracle::random_tensor<double>({2, 3, 4, 4}, 32, -1, 1, true);
        auto b = oracle::random_tensor<double>({3, 1, 1, 1}, 33, -1, 1, true);
        auto r = finite_difference_check(
            [](const std::vector<TD>& in) { return random_projection(conv2d_transpose(in[0], in[1], in[2], 2), 9); },
            {x, w, b});
        CHECK(r.max_relative_error < 1e-5);
    }
}

TEST_SUITE("leaky_relu") {
    TEST_CASE("values") {
        auto y = leaky_relu(TF::from({1, 1, 1, 3}, {-1.f, 0.f, 2.f}), 0.1f);
        CHECK(y.data()[0] == doctest::Approx(-0.1f));
        CHECK(y.data()[1] == 0.f);
        CHECK(y.data()[2] == 2.f);
        auto r = leaky_relu(TF::from({1, 1, 1, 2}, {-3.f, 4.f}), 0.f);
        CHECK(r.data()[0] == 0.f);
        CHECK(r.data()[1] == 4.f);
        CHECK_THROWS(leaky_relu(TF::zeros({1, 1, 1, 1}), 1.f));
    }

    TEST_CASE("slope alpha at x = -2 by central difference, and alpha at exactly zero") {
        auto x = TD::from({1, 1, 1, 2}, {-2.0, 0.0}, true);
        backward(sum(leaky_relu(x, 0.1)));
        const double h = 1e-6;
        auto f = [](double v) { return v > 0 ? v : 0.1 * v; };
        CHECK(x.grad()[0] == doctest::Approx((f(-2 + h) - f(-2 - h)) / (2 * h)).epsilon(1e-9));
        CHECK(x.grad()[1] == 0.1);
    }

    TEST_CASE("finite differences away from zero") {
        auto x = oracle::random_tensor<double>({1, 3, 4, 4}, 41, -1, 1, true);
        for (auto& v : x.data())
            if (std::abs(v) < 0.05) v = 0.3;
        auto r = finite_difference_check(
            [](const std::vector<TD>& in) { return random_projection(leaky_relu(in[0], 0.1), 3); }, {x});
        CHECK(r.max_relative_error < 1e-7);
    }
}

TEST_SUITE("concat_channels") {
    TEST_CASE("9 + 81 + 9 + 81 channels") {
        std::vector<TF> parts;
        for (int c : {9, 81, 9, 81}) parts.push_back(TF::zeros({1, c, 4, 8}));
        CHECK(concat_channels(parts).shape() == Shape{1, 180, 4, 8});
    }

    TEST_CASE("single part is identity") {
        auto x = oracle::random_tensor<float>({2, 3, 2, 2}, 1);
        auto y = concat_channels<float>({x});
        for (int64_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == x.data()[i]);
    }

    TEST_CASE("gradient slice [9, 90) lands on part two") {
        std::vector<TD> parts;
        for (int c : {9, 81, 9, 81}) parts.push_back(TD::zeros({1, c, 2, 2}, true));
        auto y = concat_channels(parts);
        std::vector<double> w(static_cast<size_t>(y.numel()), 0.0);
        for (int64_t c = 9; c < 90; ++c)
            for (int64_t i = 0; i < 4; ++i) w[static_cast<size_t>(c * 4 + i)] = 1.0;
        backward(weighted_sum(y, TD::from(y.shape(), w)));
        for (double g : std::as_const(parts[1]).grad()) CHECK(g == 1.0);
        for (size_t k : {0u, 2u, 3u})
            for (double g : std::as_const(parts[k]).grad()) CHECK(g == 0.0);
    }

    TEST_CASE("spatial mismatch is rejected") {
        CHECK_THROWS_AS(concat_channels<float>({TF::zeros({1, 1, 2, 2}), TF::zeros({1, 1, 2, 3})}), ShapeError);
    }

    TEST_CASE("finite differences are exact for a linear map") {
        // Any step is exact for a linear map; a large one keeps rounding noise down.
        auto a = oracle::random_tensor<double>({2, 2, 3, 3}, 1, -1, 1, true);
        auto b = oracle::random_tensor<double>({2, 1, 3, 3}, 2, -1, 1, true);
        auto r = finite_difference_check(
            [](const std::vector<TD>& in) { return random_projection(concat_channels(in), 5); }, {a, b}, 0.5);
        CHECK(r.max_relative_error < 1e-10);
    }
}

TEST_SUITE("bilinear_upsample") {
    TEST_CASE("constant map stays constant") {
        for (int f : {1, 2, 3, 4}) {
            auto y = bilinear_upsample(TF::full({1, 2, 3, 5}, 5.f), f);
            CHECK(y.shape() == Shape{1, 2, 3 * f, 5 * f});
            for (float v : y.data()) CHECK(v == doctest::Approx(5.f));
        }
    }

    TEST_CASE("factor 1 is identity") {
        auto x = oracle::random_tensor<float>({1, 1, 3, 3}, 4);
        auto y = bilinear_upsample(x, 1);
        for (int64_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == x.data()[i]);
    }

    TEST_CASE("2x2 ramp matches the closed form") {
        // Half-pixel sampling of [[0,1],[2,3]] at factor 2 puts output row/col
        // o at fractional source offset t = {0, 0.25, 0.75, 1}; the bilinear
        // surface is value(ty, tx) = tx + 2*ty.
        auto y = bilinear_upsample(TD::from({1, 1, 2, 2}, {0, 1, 2, 3}), 2);
        const double t[4] = {0.0, 0.25, 0.75, 1.0};
        for (int oy = 0; oy < 4; ++oy)
            for (int ox = 0; ox < 4; ++ox) CHECK(std::abs(y.at(0, 0, oy, ox) - (t[ox] + 2 * t[oy])) < 1e-6);
    }

    TEST_CASE("finite differences") {
        auto x = oracle::random_tensor<double>({2, 2, 3, 4}, 51, -1, 1, true);
        for (int f : {2, 4}) {
            auto r = finite_difference_check(
                [f](const std::vector<TD>& in) { return random_projection(bilinear_upsample(in[0], f), 8); }, {x});
            CHECK(r.max_relative_error < 1e-5);
        }
    }
}

TEST_SUITE("composite graph") {
    TEST_CASE("five-op graph matches central differences") {
        auto x = oracle::random_tensor<double>({1, 2, 6, 6}, 61, -1, 1, true);
        auto w1 = oracle::random_tensor<double>({3, 2, 3, 3}, 62, -0.5, 0.5, true);
        auto w2 = oracle::random_tensor<double>({3, 2, 4, 4}, 63, -0.5, 0.5, true);
        auto b2 = oracle::random_tensor<double>({2, 1, 1, 1}, 64, -0.5, 0.5, true);
        auto r = finite_difference_check(
            [](const std::vector<TD>& in) {
                auto h = leaky_relu(conv2d(in[0], in[1], TD(), {2, 1, 1}), 0.1);
                auto u = conv2d_transpose(h, in[2], in[3], 2);
                auto c = concat_channels<double>({u, in[0]});
                return random_projection(bilinear_upsample(c, 2), 17);
            },
            {x, w1, w2, b2});
        CHECK(r.max_relative_error < 1e-5);
    }

    TEST_CASE("forward is bit-identical across runs") {
        auto x = oracle::random_tensor<float>({1, 4, 16, 16}, 71);
        auto w = oracle::random_tensor<float>({8, 4, 3, 3}, 72);
        auto a = conv2d(x, w, TF(), {1, 2, 2});
        auto b = conv2d(x, w, TF(), {1, 2, 2});
        for (int64_t i = 0; i < a.numel(); ++i) CHECK(a.data()[i] == b.data()[i]);
    }
}

TEST_SUITE("masked_l1") {
    TEST_CASE("sums absolute errors over valid pixels only") {
        auto p = TD::from({1, 2, 1, 2}, {1, 2, 3, 4}, true);
        auto t = TD::from({1, 2, 1, 2}, {0, 0, 0, 0});
        auto m = TD::from({1, 1, 1, 2}, {1, 0});
        auto l = masked_l1(p, t, m);
        CHECK(l.item() == 4.0);
        backward(l);
        CHECK(p.grad()[0] == 1.0);
        CHECK(p.grad()[1] == 0.0);
        CHECK(p.grad()[2] == 1.0);
    }
}

TEST_SUITE("adam") {
    TEST_CASE("first step with unit gradient moves by the learning rate") {
        std::vector<TD> params{TD::full({1, 1, 1, 3}, 0.5, true)};
        for (auto& g : params[0].grad()) g = 1.0;
        AdamState<double> st;
        REQUIRE(adam_step<double>(params, st, 1e-4) == AdamOutcome::Applied);
        for (double v : params[0].data()) CHECK(std::abs((0.5 - v) - 1e-4) < 1e-9);
        CHECK(st.step == 1);
    }

    TEST_CASE("zero gradient leaves parameters and decays moments") {
        std::vector<TD> fresh{TD::full({1, 1, 1, 2}, 1.0, true)};
        AdamState<double> st;
        adam_step<double>(fresh, st, 1e-3);
        for (double v : fresh[0].data()) CHECK(v == 1.0);

        std::vector<TD> params{TD::full({1, 1, 1, 2}, 1.0, true)};
        AdamState<double> st2;
        params[0].grad()[0] = 1.0;
        adam_step<double>(params, st2, 1e-3);
        const double m0 = st2.first_moment[0][0];
        const double v0 = st2.second_moment[0][0];
        params[0].zero_grad();
        adam_step<double>(params, st2, 1e-3);
        CHECK(st2.first_moment[0][0] == doctest::Approx(0.9 * m0));
        CHECK(st2.second_moment[0][0] == doctest::Approx(0.999 * v0));
        CHECK(st2.step == 2);
    }

    TEST_CASE("non-finite gradient skips the step") {
        std::vector<TF> params{TF::full({1, 1, 1, 2}, 1.f, true)};
        params[0].grad()[1] = std::numeric_limits<float>::quiet_NaN();
        AdamState<float> st;
        CHECK(adam_step<float>(params, st, 1e-3) == AdamOutcome::SkippedNonFinite);
        CHECK(st.step == 0);
        for (float v : params[0].data()) CHECK(v == 1.f);
    }

    TEST_CASE("default betas") {
        AdamOptions o;
        CHECK(o.beta1 == 0.9);
        CHECK(o.beta2 == 0.999);
    }
}

TEST_SUITE("checkpoint") {
    TEST_CASE("round trip is bit-exact") {
        ParamStore<float> store;
        auto a = oracle::random_tensor<float>({4, 3, 3, 3}, 1);
        store.add("enc.w", {4, 3, 3, 3}, {a.data().begin(), a.data().end()});
        store.add("enc.b", {4}, {1.f, -2.f, 3.5f, 1e-30f});
        auto bytes = encode_checkpoint(snapshot(store));
        CHECK(std::equal(bytes.begin(), bytes.begin() + 8, "DWARFCKP"));

        ParamStore<float> other;
        other.add("enc.w", {4, 3, 3, 3}, std::vector<float>(108, 0.f));
        other.add("enc.b", {4}, std::vector<float>(4, 0.f));
        restore(other, decode_checkpoint(bytes));
        for (size_t i = 0; i < 2; ++i) {
            auto x = store.entries()[i].tensor.data();
            auto y = other.entries()[i].tensor.data();
            CHECK(std::memcmp(x.data(), y.data(), x.size_bytes()) == 0);
        }
        CHECK(encode_checkpoint(snapshot(other)) == bytes);
    }

    TEST_CASE("golden layout of a one-parameter file") {
        ParamStore<float> store;
        store.add("b", {1}, {1.0f});
        auto bytes = encode_checkpoint(snapshot(store));
        const std::vector<uint8_t> golden = {'D', 'W', 'A', 'R', 'F', 'C', 'K', 'P', 1, 0, 0, 0, 1, 0, 0, 0,
                                             1,   0,   0,   0,   'b', 1,   0,   0,   0, 1, 0, 0, 0, 0, 0, 0x80, 0x3f};
        CHECK(bytes == golden);
    }

    TEST_CASE("malformed inputs are rejected") {
        CHECK_THROWS(decode_checkpoint({'X', 'X'}));
        ParamStore<float> store;
        store.add("b", {2}, {1.f, 2.f});
        auto bytes = encode_checkpoint(snapshot(store));
        bytes.pop_back();
        CHECK_THROWS(decode_checkpoint(bytes));
        ParamStore<float> other;
        other.add("c", {2}, {0.f, 0.f});
        CHECK_THROWS(restore(other, decode_checkpoint(encode_checkpoint(snapshot(store)))));
    }
}
