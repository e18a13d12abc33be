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

#include "dwarf/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dwarf/ops.hpp"

namespace dwarf {

GradCheckResult finite_difference_check(const ScalarFunction& f, std::vector<Tensor<double>> inputs, double h) {
    for (auto& in : inputs) in.zero_grad();
    backward(f(inputs));

    GradCheckResult result;
    NoGradGuard no_grad;
    for (size_t k = 0; k < inputs.size(); ++k) {
        Tensor<double>& in = inputs[k];
        if (!in.requires_grad()) continue;
        std::vector<double> analytic(static_cast<size_t>(in.numel()), 0.0);
        if (in.has_grad()) std::ranges::copy(std::as_const(in).grad(), analytic.begin());
        auto values = in.data();
        for (size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + h;
            const double up = f(inputs).item();
            values[i] = saved - h;
            const double down = f(inputs).item();
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
            const double err = std::abs(analytic[i] - numeric) / denom;
            ++result.coordinates;
            if (err > result.max_relative_error || result.worst_index < 0) {
                result.max_relative_error = err;
                result.worst_input = k;
                result.worst_index = static_cast<int64_t>(i);
                result.analytic = analytic[i];
                result.numeric = numeric;
            }
        }
    }
    return result;
}

Tensor<double> random_projection(const Tensor<double>& out, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> w(static_cast<size_t>(out.numel()));
    for (auto& v : w) v = u(rng);
    return weighted_sum(out, Tensor<double>::from(out.shape(), std::move(w)));
}

}  // namespace dwarf
