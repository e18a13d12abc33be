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

#include <cstdint>
#include <span>
#include <vector>

#include "dwarf/tensor.hpp"

namespace dwarf {

struct AdamOptions {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
    AdamOptions options;
    int64_t step = 0;
    std::vector<std::vector<T>> first_moment;
    std::vector<std::vector<T>> second_moment;
};

enum class AdamOutcome { Applied, SkippedNonFinite };

/// Bias-corrected Adam update using each parameter's accumulated gradient
/// (missing gradients count as zero). A non-finite gradient anywhere leaves
/// parameters, moments and the step counter untouched.
template <typename T>
AdamOutcome adam_step(std::span<Tensor<T>> params, AdamState<T>& state, double learning_rate);

}  // namespace dwarf
