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

#include <cmath>
#include <random>

#include "dwarf/correlation.hpp"
#include "dwarf/gradcheck.hpp"
#include "dwarf/ops.hpp"
#include "dwarf/training.hpp"
#include "dwarf/warp.hpp"

namespace dwarf {

namespace {

using TD = Tensor<double>;
using Inputs = std::vector<TD>;

class Sampler {
   public:
    explicit Sampler(uint64_t seed) : rng_(seed) {}

    TD uniform(Shape s, double lo, double hi) {
        std::uniform_real_distribution<double> u(lo, hi);
        std::vector<double> v(static_cast<size_t>(s.numel()));
        for (auto& x : v) x = u(rng_);
        return TD::from(s, std::move(v), true);
    }
    // Values in [lo, hi] whose fractional parts stay inside [0.2, 0.8].
    TD off_grid(Shape s, int lo, int hi) {
        std::uniform_int_distribution<int> whole(lo, hi);
        std::uniform_real_distribution<double> frac(0.2, 0.8);
        std::vector<double> v(static_cast<size_t>(s.numel()));
        for (auto& x : v) x = whole(rng_) + frac(rng_);
        return TD::from(s, std::move(v), true);
    }
    // Magnitudes in [0.1, 1] with random sign.
    TD away_from_zero(Shape s) {
        std::uniform_real_distribution<double> u(0.1, 1.0);
        std::bernoulli_distribution sign(0.5);
        std::vector<double> v(static_cast<size_t>(s.numel()));
        for (auto& x : v) x = sign(rng_) ? u(rng_) : -u(rng_);
        return TD::from(s, std::move(v), true);
    }

   private:
    std::mt19937_64 rng_;
};

CorrConfig radii(int rx, int ry, int rz) {
    CorrConfig c;
    c.rx = rx;
    c.ry = ry;
    c.rz = rz;
    return c;
}

}  // namespace

std::vector<GradSuiteEntry> run_gradient_suite(uint64_t seed) {
    Sampler s(seed + 1);
    std::vector<GradSuiteEntry> out;
    auto run = [&](const std::string& name, const ScalarFunction& f, Inputs in) {
        out.push_back({name, finite_difference_check(f, std::move(in), 1e-5)});
    };
    auto project = [](uint64_t k) { return [k](const TD& t) { return random_projection(t, k); }; };

    for (int dilation : {1, 2})
        run("conv2d (stride 1, dilation " + std::to_string(dilation) + ")",
            [&, dilation](const Inputs& in) { return project(1)(conv2d(in[0], in[1], in[2], {1, dilation, dilation})); },
            {s.uniform({2, 2, 6, 6}, -1, 1), s.uniform({3, 2, 3, 3}, -1, 1), s.uniform({3, 1, 1, 1}, -1, 1)});
    run("conv2d (stride 2)", [&](const Inputs& in) { return project(2)(conv2d(in[0], in[1], in[2], {2, 1, 1})); },
        {s.uniform({1, 3, 7, 6}, -1, 1), s.uniform({2, 3, 3, 3}, -1, 1), s.uniform({2, 1, 1, 1}, -1, 1)});
    run("conv2d_transpose",
        [&](const Inputs& in) { return project(3)(conv2d_transpose(in[0], in[1], in[2], 2, 1)); },
        {s.uniform({1, 2, 3, 4}, -1, 1), s.uniform({2, 3, 4, 4}, -1, 1), s.uniform({3, 1, 1, 1}, -1, 1)});
    run("leaky_relu", [&](const Inputs& in) { return project(4)(leaky_relu(in[0], 0.1)); },
        {s.away_from_zero({2, 3, 4, 4})});
    run("concat_channels", [&](const Inputs& in) { return project(5)(concat_channels<double>({in[0], in[1]})); },
        {s.uniform({1, 2, 3, 3}, -1, 1), s.uniform({1, 3, 3, 3}, -1, 1)});
    run("bilinear_upsample", [&](const Inputs& in) { return project(6)(bilinear_upsample(in[0], 4)); },
        {s.uniform({1, 2, 3, 4}, -1, 1)});
    run("bilinear_sample", [&](const Inputs& in) { return project(7)(bilinear_sample(in[0], in[1])); },
        {s.uniform({1, 2, 5, 6}, -1, 1), s.off_grid({1, 2, 4, 4}, 0, 4)});
    run("corr1d", [&](const Inputs& in) { return project(8)(corr1d(in[0], in[1], radii(2, 0, 0)).scores); },
        {s.uniform({1, 3, 4, 6}, -1, 1), s.uniform({1, 3, 4, 6}, -1, 1)});
    run("corr2d", [&](const Inputs& in) { return project(9)(corr2d(in[0], in[1], radii(2, 1, 0)).scores); },
        {s.uniform({1, 3, 4, 6}, -1, 1), s.uniform({1, 3, 4, 6}, -1, 1)});
    run("corr3d",
        [&](const Inputs& in) {
            return project(10)(corr3d(CostVolume<double>{in[0], {2}}, CostVolume<double>{in[1], {2}}, radii(1, 1, 1)).scores);
        },
        {s.uniform({1, 5, 4, 5}, -1, 1), s.uniform({1, 5, 4, 5}, -1, 1)});
    run("warp_by_flow", [&](const Inputs& in) { return project(11)(warp_by_flow(in[0], in[1])); },
        {s.uniform({1, 2, 5, 6}, -1, 1), s.off_grid({1, 2, 5, 6}, -2, 1)});
    run("warp_by_disparity", [&](const Inputs& in) { return project(12)(warp_by_disparity(in[0], in[1])); },
        {s.uniform({1, 2, 5, 6}, -1, 1), s.off_grid({1, 1, 5, 6}, 0, 2)});
    {
        // u - change must stay off the integer grid as well.
        auto flow = s.off_grid({1, 2, 4, 5}, -1, 1);
        auto change = s.off_grid({1, 1, 4, 5}, 0, 1);
        for (int64_t y = 0; y < 4; ++y)
            for (int64_t x = 0; x < 5; ++x) change.at(0, 0, y, x) = std::floor(change.at(0, 0, y, x));
        run("warp_by_flow_and_change",
            [&](const Inputs& in) { return project(13)(warp_by_flow_and_change(in[0], in[1], in[2])); },
            {s.uniform({1, 2, 4, 5}, -1, 1), flow, change});
    }
    run("scale_prior", [&](const Inputs& in) { return project(14)(scale_prior(in[0], 3)); },
        {s.uniform({1, 2, 3, 3}, -1, 1)});
    {
        auto target = Tensor<double>::from({1, 2, 3, 3}, std::vector<double>(18, 0.0));
        auto mask = Tensor<double>::from({1, 1, 3, 3}, {1, 1, 0, 1, 0, 1, 1, 1, 1});
        run("masked_l1", [&, target, mask](const Inputs& in) { return masked_l1(in[0], target, mask); },
            {s.away_from_zero({1, 2, 3, 3})});
    }
    {
        SceneFlowField gt;
        Sampler g(seed + 2);
        gt.flow = Tensor<float>::zeros({1, 2, 8, 8});
        gt.disparity = Tensor<float>::zeros({1, 1, 8, 8});
        gt.change = Tensor<float>::zeros({1, 1, 8, 8});
        gt.mask = Tensor<float>::full({1, 1, 8, 8}, 1.0f);
        gt.mask.at(0, 0, 0, 0) = 0;
        for (auto* t : {&gt.flow, &gt.disparity, &gt.change}) {
            const auto v = g.uniform(t->shape(), 0, 30);
            for (int64_t i = 0; i < t->numel(); ++i) t->data()[static_cast<size_t>(i)] = static_cast<float>(v.data()[static_cast<size_t>(i)]);
        }
        LossWeights w = LossWeights::pretraining();
        w.alpha = {0, 0, 0.005, 0.01, 0, 0, 0};
        for (auto norm : {RegularizerNorm::SquaredL2, RegularizerNorm::SquaredL1}) {
            w.norm = norm;
            // Predictions sit above every ground-truth cell average (< 1.5), so no |.| kink is crossed.
            run(std::string("multiscale_loss (") + (norm == RegularizerNorm::SquaredL2 ? "squared L2" : "squared L1") + ")",
                [&, gt, w](const Inputs& in) {
                    SceneFlowOutput<double> o;
                    EstimatorOutput<double> l3, l2;
                    l3.level = 3;
                    l3.estimate = {in[0], in[1], in[2]};
                    l2.level = 2;
                    l2.estimate = {in[3], in[4], in[5]};
                    o.levels = {l3, l2};
                    o.quarter = l2.estimate;
                    ParamStore<double> store;
                    store.add("theta", {4}, {0, 0, 0, 0}) = in[6];
                    return multiscale_loss(o, gt, w, &store).total;
                },
                {s.uniform({1, 2, 1, 1}, 2, 3), s.uniform({1, 1, 1, 1}, 2, 3), s.uniform({1, 1, 1, 1}, 2, 3),
                 s.uniform({1, 2, 2, 2}, 2, 3), s.uniform({1, 1, 2, 2}, 2, 3), s.uniform({1, 1, 2, 2}, 2, 3),
                 s.away_from_zero({4, 1, 1, 1})});
        }
    }
    return out;
}

}  // namespace dwarf
