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
#include <optional>
#include <string>
#include <vector>

#include "dwarf/correlation.hpp"
#include "dwarf/params.hpp"
#include "dwarf/tensor.hpp"

namespace dwarf {

inline constexpr int kPyramidLevels = 6;
inline constexpr int kFinestEstimatorLevel = 2;
inline constexpr std::array<int64_t, 6> kEncoderChannels = {16, 32, 64, 96, 128, 196};
inline constexpr std::array<int, 3> kEncoderStrides = {2, 1, 1};
inline constexpr std::array<int64_t, 3> kBackboneChannels = {128, 128, 96};
inline constexpr std::array<int64_t, 2> kHeadChannels = {64, 32};
inline constexpr std::array<int64_t, 6> kRefineChannels = {128, 128, 128, 96, 64, 32};
inline constexpr std::array<int, 6> kRefineDilations = {1, 2, 4, 8, 16, 1};
inline constexpr int64_t kZetaUpChannels = 2;
inline constexpr double kLeakySlope = 0.1;

enum class Task { Flow = 0, Disparity = 1, Change = 2 };
inline constexpr std::array<Task, 3> kTasks = {Task::Flow, Task::Disparity, Task::Change};
/// Prediction channels: flow 2, disparity 1, disparity change 1.
constexpr int64_t task_channels(Task t) { return t == Task::Flow ? 2 : 1; }
const char* task_name(Task t);

struct ModelConfig {
    bool dense = true;
    bool corr3d = true;
    bool refine = true;
    /// rx serves the 1D volumes; rx, ry the flow volume; rx, ry, rz the 3D volume.
    CorrConfig corr{};

    /// "baseline", "full", or a comma list drawn from dense, 3dcorr, refine.
    static ModelConfig from_variant(const std::string& variant);
    /// Keys: dense, corr3d, refine, rx, ry, rz, normalize.
    static ModelConfig load(const std::filesystem::path& path);
    std::string variant_name() const;
    std::string to_text() const;
};

/// The four rows of the ablation table, in order.
std::vector<ModelConfig> ablation_variants();

/// Flow (N,2,H,W), disparity (N,1,H,W) and disparity change (N,1,H,W).
template <typename T>
struct TaskTriple {
    Tensor<T> flow, disparity, change;

    Tensor<T>& operator[](Task t) { return t == Task::Flow ? flow : t == Task::Disparity ? disparity : change; }
    const Tensor<T>& operator[](Task t) const {
        return t == Task::Flow ? flow : t == Task::Disparity ? disparity : change;
    }
};

template <typename T>
struct EstimatorOutput {
    int level = 0;
    TaskTriple<T> estimate;               // prediction units (pixels / 20 at full resolution)
    std::array<Tensor<T>, 3> zeta;        // 32-channel head features, task order
    std::optional<TaskTriple<T>> up;      // transposed-conv priors for level - 1
    Tensor<T> zeta_up;                    // 3 x 2 channels, undefined at the finest level
};

template <typename T>
struct LevelPriors {
    TaskTriple<T> estimate;  // upsampled, prediction units
    Tensor<T> zeta;          // 6 channels
};

template <typename T>
struct SceneFlowOutput {
    std::vector<EstimatorOutput<T>> levels;  // k = 6 .. 2
    TaskTriple<T> quarter;                   // refined (or level-2) estimate, prediction units
    TaskTriple<T> full;                      // x4 bilinear, x20: pixels at input resolution
};

/// Cost volumes for one pyramid level, before activation.
template <typename T>
struct LevelVolumes {
    CostVolume<T> disp1, flow, disp2;
    std::optional<CostVolume<T>> shift;
};

template <typename T>
class Model {
   public:
    explicit Model(ModelConfig config);

    const ModelConfig& config() const { return config_; }
    ParamStore<T>& params() { return params_; }
    const ParamStore<T>& params() const { return params_; }
    int64_t parameter_count() const { return params_.count(); }
    int conv_layer_count(const std::string& prefix) const;

    /// Fan-in Gaussian weights, zero biases, zero residual outputs. The same
    /// seed always produces the same values.
    void init_params(uint64_t seed);

    /// Channel width of the stacked estimator input at `level`.
    int64_t estimator_input_channels(int level) const;

    /// phi^1 .. phi^6 (index 0 is level 1).
    std::vector<Tensor<T>> encode(const Tensor<T>& image) const;

    /// Warps the level's features by the priors (none at the coarsest level)
    /// and computes the 1D, 2D and, when enabled, 3D volumes.
    LevelVolumes<T> cost_volumes(int level, const Tensor<T>& l1, const Tensor<T>& r1, const Tensor<T>& l2,
                                 const Tensor<T>& r2, const LevelPriors<T>* priors) const;

    /// phi, activated volumes, priors and upsampled zeta in that channel order.
    Tensor<T> stack_volume(int level, const Tensor<T>& phi, const LevelVolumes<T>& volumes,
                           const LevelPriors<T>* priors) const;

    /// Runs the level-k estimator on a stacked input volume.
    EstimatorOutput<T> estimator_forward(int level, const Tensor<T>& volume) const;

    TaskTriple<T> refine(const std::array<Tensor<T>, 3>& zeta, const TaskTriple<T>& estimate) const;

    SceneFlowOutput<T> forward(const Tensor<T>& l1, const Tensor<T>& r1, const Tensor<T>& l2,
                               const Tensor<T>& r2) const;

   private:
    Tensor<T> conv(const std::string& name, const Tensor<T>& x, int stride = 1, int dilation = 1,
                   bool activate = true) const;
    Tensor<T> upconv(const std::string& name, const Tensor<T>& x) const;
    // gain 2 for layers followed by leaky-relu, 1 for linear outputs, 0 for
    // zero-initialized weights.
    void add_conv(const std::string& name, int64_t cin, int64_t cout, double gain);
    void add_upconv(const std::string& name, int64_t cin, int64_t cout);
    void build();

    ModelConfig config_;
    ParamStore<T> params_;
    std::vector<double> init_std_;  // per entry; 0 means zero-initialized
};

/// Prediction units to pixels at full resolution after x4 upsampling.
template <typename T>
TaskTriple<T> to_full_resolution(const TaskTriple<T>& quarter);

}  // namespace dwarf
