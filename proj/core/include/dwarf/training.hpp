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

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dwarf/data.hpp"
#include "dwarf/network.hpp"
#include "dwarf/params.hpp"

namespace dwarf {

enum class RegularizerNorm { SquaredL2, SquaredL1 };

struct LossWeights {
    /// alpha[k] weights pyramid level k (indices 0 and 1 unused).
    std::array<double, 7> alpha{};
    /// Task weights: disparity, disparity change, flow.
    std::array<double, 3> epsilon{1.0, 1.0, 0.5};
    double gamma = 0.0;
    RegularizerNorm norm = RegularizerNorm::SquaredL2;
    /// Supervise the x4-upsampled output at input resolution with alpha[2]
    /// instead of the pyramid levels.
    bool full_resolution = false;

    static LossWeights pretraining();
    static LossWeights fine_tuning();
    void validate() const;
};

/// Ground truth at pyramid level k in prediction units: block averages of the
/// valid pixels over 2^k x 2^k cells, divided by 20. A cell is valid when any
/// of its pixels is. Level 0 only rescales.
SceneFlowField downscale_gt(const SceneFlowField& gt, int level);

template <typename T>
struct LossTerms {
    Tensor<T> total;  // scalar, differentiable
    double data = 0.0;
    double regularizer = 0.0;
    bool empty_mask = false;  // no valid pixel at some supervised level
};

/// Masked-sum L1 data term over the supervised levels plus gamma times the
/// parameter norm. `gt` is in pixels at input resolution; `params` may be null.
/// Level 2 supervises the refined quarter-resolution output.
template <typename T>
LossTerms<T> multiscale_loss(const SceneFlowOutput<T>& outputs, const SceneFlowField& gt, const LossWeights& weights,
                             const ParamStore<T>* params);

/// Loss of one level-shaped estimate against already downscaled ground truth.
template <typename T>
Tensor<T> level_data_loss(const TaskTriple<T>& estimate, const SceneFlowField& gt_level,
                          const std::array<double, 3>& epsilon);

// ---------------------------------------------------------------------------
// Augmentation

struct AugmentSpec {
    bool photometric = true;
    double gamma_min = 0.8, gamma_max = 1.2;
    double brightness_min = 0.5, brightness_max = 2.0;
    double color_min = 0.8, color_max = 1.2;
    double zoom_probability = 0.5;
    double zoom_min = 1.0, zoom_max = 1.8;
};

struct PhotometricDraw {
    double gamma = 1.0;
    double brightness = 1.0;
    std::array<double, 3> color{1.0, 1.0, 1.0};
};

/// x -> clip(color_c * brightness * x^gamma, 0, 1) per channel.
Tensor<float> apply_photometric(const Tensor<float>& image, const PhotometricDraw& draw);
/// Independent draws for L1, R1, L2 and R2. Ground truth is untouched.
SceneSample augment_photometric(const SceneSample& sample, const AugmentSpec& spec, std::mt19937_64& rng);

/// Resizes images (bilinear) and ground truth (nearest, validity carried
/// along) by z about the image centre, keeps the original size and multiplies
/// flow, disparity and disparity change by z.
SceneSample apply_zoom(const SceneSample& sample, double z);
/// With probability zoom_probability, one z for all views and ground truth.
SceneSample augment_zoom(const SceneSample& sample, const AugmentSpec& spec, std::mt19937_64& rng);

/// Zero-pads images on the bottom and right to at least (width, height); the
/// padding is invalid ground truth.
SceneSample pad_sample(const SceneSample& sample, int width, int height);
SceneSample crop_sample(const SceneSample& sample, int x0, int y0, int width, int height);
/// Uniformly random top-left corner.
SceneSample random_crop(const SceneSample& sample, int width, int height, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Schedules

enum class DistillMode { GtOnly, PxOnly, PxPlusGt, PxThenGt };
const char* distill_mode_name(DistillMode m);
DistillMode parse_distill_mode(const std::string& name);

enum class LossPreset { Pretraining, FineTuning };

struct TrainSchedule {
    std::string name = "custom";
    int64_t total_steps = 0;
    int batch_size = 1;
    int crop_width = 0, crop_height = 0;
    std::optional<std::array<int, 2>> pad;  // (width, height)
    double learning_rate = 1e-4;
    std::vector<int64_t> decay_steps;
    std::vector<double> decay_factors;
    LossPreset loss = LossPreset::Pretraining;
    LossWeights weights = LossWeights::pretraining();
    AugmentSpec augment;
    bool augment_enabled = true;
    DistillMode mode = DistillMode::GtOnly;
    int64_t split_step = 0;  // PxThenGt: first step drawn from the Gt pool

    /// base * product of the factors of every decay point <= step.
    double lr_at(int64_t step) const;
    void validate() const;
    std::string to_text() const;

    /// Reads `key = value` lines. An optional `preset` key seeds the values.
    static TrainSchedule load(const std::filesystem::path& path);
    static TrainSchedule parse(const std::string& text, const std::string& source);
};

/// flyingthings, kitti_ft or distilled_ft.
TrainSchedule make_schedule(const std::string& preset);

// ---------------------------------------------------------------------------
// Training loop

struct StepLog {
    int64_t step = 0;
    double loss = 0.0, data_loss = 0.0, reg_loss = 0.0, lr = 0.0;
    std::string pool;
};

struct TrainOptions {
    std::function<void(const StepLog&)> on_step;
    /// Checked after on_step; returning true ends training early.
    std::function<bool(const StepLog&)> stop_after;
    /// Comma-separated log (step, loss, data_loss, reg_loss, lr, pool).
    std::optional<std::filesystem::path> log_path;
};

/// The batch for step s depends only on (seed, s). Throws before any update
/// when the schedule's mode needs a pool the dataset lacks or a crop does not
/// fit. Non-finite gradients skip the update.
template <typename T>
std::vector<StepLog> train(Model<T>& model, const std::vector<SceneSample>& dataset, const TrainSchedule& schedule,
                           uint64_t seed, const TrainOptions& options = {});

/// The sample the loop would consume at `step` for slot `slot` of the batch.
SceneSample prepare_sample(const std::vector<SceneSample>& dataset, const std::vector<size_t>& pool,
                           const TrainSchedule& schedule, uint64_t seed, int64_t step, int slot);

template <typename T>
Tensor<T> cast_tensor(const Tensor<float>& x);

}  // namespace dwarf
