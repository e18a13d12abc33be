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

#include "dwarf/adam.hpp"

#include <cmath>
#include <utility>

namespace dwarf {

template <typename T>
AdamOutcome adam_step(std::span<Tensor<T>> params, AdamState<T>& state, double learning_rate) {
    if (state.first_moment.empty()) {
        for (const auto& p : params) {
            state.first_moment.emplace_back(static_cast<size_t>(p.numel()), T(0));
            state.second_moment.emplace_back(static_cast<size_t>(p.numel()), T(0));
        }
    }
    if (state.first_moment.size() != params.size()) throw ShapeError("adam_step: state tracks a different parameter list");
    for (size_t i = 0; i < params.size(); ++i) {
        if (static_cast<int64_t>(state.first_moment[i].size()) != params[i].numel())
            throw ShapeError("adam_step: moment size mismatch for parameter " + std::to_string(i));
        if (!params[i].has_grad()) continue;
        for (T g : std::as_const(params[i]).grad())
            if (!std::isfinite(g)) return AdamOutcome::SkippedNonFinite;
    }

    const AdamOptions& o = state.options;
    ++state.step;
    const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        T* w = params[i].ptr();
        const bool has = params[i].has_grad();
        const T* g = has ? std::as_const(params[i]).grad().data() : nullptr;
        for (size_t j = 0; j < m.size(); ++j) {
            const double gj = has ? static_cast<double>(g[j]) : 0.0;
            const double mj = o.beta1 * m[j] + (1.0 - o.beta1) * gj;
            const double vj = o.beta2 * v[j] + (1.0 - o.beta2) * gj * gj;
            m[j] = static_cast<T>(mj);
            v[j] = static_cast<T>(vj);
            w[j] = static_cast<T>(w[j] - learning_rate * (mj / c1) / (std::sqrt(vj / c2) + o.epsilon));
        }
    }
    return AdamOutcome::Applied;
}

template AdamOutcome adam_step(std::span<Tensor<float>>, AdamState<float>&, double);
template AdamOutcome adam_step(std::span<Tensor<double>>, AdamState<double>&, double);

}  // namespace dwarf
