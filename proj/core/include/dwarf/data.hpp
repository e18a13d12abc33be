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
#include <vector>

#include "dwarf/tensor.hpp"

namespace dwarf {

enum class Provenance { Gt, Px };
const char* provenance_token(Provenance p);

/// Ground truth for one sample, all (1, C, H, W) in pixels at image resolution.
/// `change` is the t2 disparity expressed at L1 pixels. `mask` marks pixels
/// with ground truth; `noc`, when defined, additionally requires a visible
/// correspondence in R1, L2 and R2.
struct SceneFlowField {
    Tensor<float> flow, disparity, change, mask, noc;
};

struct SceneSample {
    Tensor<float> l1, r1, l2, r2;  // (1, 3, H, W) in [0, 1]
    SceneFlowField gt;
    Provenance provenance = Provenance::Gt;
};

/// A textured fronto-parallel rectangle. (x, y) is its top-left corner in L1.
struct SceneObject {
    double x = 0, y = 0, width = 0, height = 0;
    uint64_t texture_seed = 0;
    double d1 = 1;             // disparity at t1
    double dx = 0, dy = 0;     // image motion L1 -> L2
    double d2 = 1;             // disparity at t2
};

/// Background plane plus objects ordered back to front.
struct SceneSpec {
    int width = 128;
    int height = 64;
    uint64_t background_seed = 0;
    double background_d1 = 1, background_dx = 0, background_dy = 0, background_d2 = 1;
    std::vector<SceneObject> objects;
};

/// Random spec with `objects` rectangles. Disparities stay in [1, 12] and
/// motions in [-6, 6] so that a 64 x 128 crop remains resolvable.
SceneSpec random_scene_spec(int width, int height, int objects, uint64_t seed);

/// Renders the four views and the ground truth. Deterministic per (spec, seed).
SceneSample generate_scene(const SceneSpec& spec, uint64_t seed);

struct NoiseSpec {
    double sigma_flow = 0.5;
    double sigma_disparity = 0.5;
    double sigma_change = 0.5;
    double outlier_rate = 0.05;   // target fraction of pixels inside outlier patches
    double outlier_min = 3.0;     // magnitude range of patch corruption
    double outlier_max = 12.0;
    int patch_min = 3, patch_max = 10;
    uint64_t seed = 0;
};

/// Simulated teacher labels: GT plus i.i.d. Gaussian noise per task plus
/// rectangular patches offset by a random magnitude. Disparities are clamped
/// at zero. The mask is unchanged.
SceneFlowField make_proxy(const SceneFlowField& gt, const NoiseSpec& noise);

}  // namespace dwarf
