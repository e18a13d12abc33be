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

#include <functional>
#include <string>
#include <vector>

#include "dwarf/tensor.hpp"

namespace dwarf {

struct GradCheckResult {
    double max_relative_error = 0.0;
    size_t worst_input = 0;
    int64_t worst_index = -1;
    double analytic = 0.0;
    double numeric = 0.0;
    int64_t coordinates = 0;
};

using ScalarFunction = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

/// Compares reverse-mode gradients of a scalar function against central
/// differences (f(x+h) - f(x-h)) / 2h, coordinate by coordinate, for every
/// input that requires a gradient. Relative error uses the denominator
/// max(|analytic|, |numeric|, 1e-8).
GradCheckResult finite_difference_check(const ScalarFunction& f, std::vector<Tensor<double>> inputs, double h = 1e-6);

/// Reduces an arbitrary tensor to a scalar with fixed pseudo-random weights in
/// [-1, 1], so every output element contributes to the probed gradient.
Tensor<double> random_projection(const Tensor<double>& out, uint64_t seed);

struct GradSuiteEntry {
    std::string op;
    GradCheckResult result;
};

/// Finite-difference check of every differentiable operation on small random
/// 64-bit inputs placed away from non-smooth points.
std::vector<GradSuiteEntry> run_gradient_suite(uint64_t seed = 0);

}  // namespace dwarf
