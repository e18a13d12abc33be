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

#include "dwarf/network.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "dwarf/keyvalue.hpp"
#include "dwarf/ops.hpp"
#include "dwarf/warp.hpp"

namespace dwarf {

namespace {

constexpr int64_t kKernel = 3;
constexpr int64_t kUpKernel = 4;

std::string level_prefix(int level) { return "est" + std::to_string(level); }

}  // namespace

const char* task_name(Task t) {
    switch (t) {
        case Task::Flow: return "flow";
        case Task::Disparity: return "disp";
        case Task::Change: return "change";
    }
    return "?";
}

ModelConfig ModelConfig::from_variant(const std::string& variant) {
    ModelConfig cfg;
    if (variant == "full") return cfg;
    cfg.dense = cfg.corr3d = cfg.refine = false;
    if (variant == "baseline" || variant == "none" || variant.empty()) return cfg;
    std::istringstream in(variant);
    std::string token;
    while (std::getline(in, token, ',')) {
        if (token == "dense")
            cfg.dense = true;
        else if (token == "3dcorr" || token == "corr3d")
            cfg.corr3d = true;
        else if (token == "refine")
            cfg.refine = true;
        else
            throw std::invalid_argument("unknown variant component '" + token + "' (use dense, 3dcorr, refine)");
    }
    return cfg;
}

ModelConfig ModelConfig::load(const std::filesystem::path& path) {
    const auto kv = KeyValues::load(path);
    kv.require_known({"dense", "corr3d", "refine", "rx", "ry", "rz", "normalize"});
    ModelConfig cfg;
    cfg.dense = kv.get_bool("dense", cfg.dense);
    cfg.corr3d = kv.get_bool("corr3d", cfg.corr3d);
    cfg.refine = kv.get_bool("refine", cfg.refine);
    cfg.corr.rx = static_cast<int>(kv.get_int("rx", cfg.corr.rx));
    cfg.corr.ry = static_cast<int>(kv.get_int("ry", cfg.corr.ry));
    cfg.corr.rz = static_cast<int>(kv.get_int("rz", cfg.corr.rz));
    cfg.corr.normalize = kv.get_bool("normalize", cfg.corr.normalize);
    if (cfg.corr.rx < 0 || cfg.corr.ry < 0 || cfg.corr.rz < 0)
        throw std::invalid_argument(path.string() + ": radii must be non-negative");
    return cfg;
}

std::string ModelConfig::variant_name() const {
    std::string out;
    auto put = [&](bool on, const char* name) {
        if (!on) return;
        if (!out.empty()) out += ",";
        out += name;
    };
    put(dense, "dense");
    put(corr3d, "3dcorr");
    put(refine, "refine");
    return out.empty() ? "baseline" : out;
}

std::string ModelConfig::to_text() const {
    std::ostringstream out;
    out << std::boolalpha << "dense = " << dense << "\ncorr3d = " << corr3d << "\nrefine = " << refine
        << "\nrx = " << corr.rx << "\nry = " << corr.ry << "\nrz = " << corr.rz << "\nnormalize = " << corr.normalize
        << "\n";
    return out.str();
}

std::vector<ModelConfig> ablation_variants() {
    return {ModelConfig::from_variant("baseline"), ModelConfig::from_variant("dense"),
            ModelConfig::from_variant("dense,3dcorr"), ModelConfig::from_variant("full")};
}

template <typename T>
Model<T>::Model(ModelConfig config) : config_(config) {
    build();
}

template <typename T>
void Model<T>::add_conv(const std::string& name, int64_t cin, int64_t cout, double gain) {
    params_.add(name + ".w", {cout, cin, kKernel, kKernel}, std::vector<T>(static_cast<size_t>(cout * cin * 9)));
    init_std_.push_back(gain > 0 ? std::sqrt(gain / static_cast<double>(cin * kKernel * kKernel)) : 0.0);
    params_.add(name + ".b", {cout}, std::vector<T>(static_cast<size_t>(cout)));
    init_std_.push_back(0.0);
}

template <typename T>
void Model<T>::add_upconv(const std::string& name, int64_t cin, int64_t cout) {
    params_.add(name + ".w", {cin, cout, kUpKernel, kUpKernel}, std::vector<T>(static_cast<size_t>(cin * cout * 16)));
    // Each output pixel of a stride-2 4x4 transposed conv sees 2x2 taps per input channel.
    init_std_.push_back(std::sqrt(1.0 / static_cast<double>(cin * 4)));
    params_.add(name + ".b", {cout}, std::vector<T>(static_cast<size_t>(cout)));
    init_std_.push_back(0.0);
}

// Parameter order: encoder levels 1..6 (three convs each), estimators 6..2
// (backbone, then per task: two head convs, prediction, upsamplers), then the
// refinement networks in task order.
template <typename T>
void Model<T>::build() {
    int64_t cin = 3;
    for (int level = 1; level <= kPyramidLevels; ++level) {
        const int64_t c = kEncoderChannels[static_cast<size_t>(level - 1)];
        for (size_t i = 0; i < kEncoderStrides.size(); ++i) {
            add_conv("enc.l" + std::to_string(level) + ".c" + std::to_string(i), cin, c, 2.0);
            cin = c;
        }
    }
    for (int level = kPyramidLevels; level >= kFinestEstimatorLevel; --level) {
        const std::string pre = level_prefix(level);
        int64_t width = estimator_input_channels(level);
        int64_t last = width;
        for (size_t i = 0; i < kBackboneChannels.size(); ++i) {
            add_conv(pre + ".bb" + std::to_string(i), config_.dense ? width : last, kBackboneChannels[i], 2.0);
            width += kBackboneChannels[i];
            last = kBackboneChannels[i];
        }
        const int64_t shared = config_.dense ? width : last;
        for (Task t : kTasks) {
            const std::string head = pre + "." + task_name(t);
            int64_t hw = shared, hl = shared;
            for (size_t i = 0; i < kHeadChannels.size(); ++i) {
                add_conv(head + ".h" + std::to_string(i), config_.dense ? hw : hl, kHeadChannels[i], 2.0);
                hw += kHeadChannels[i];
                hl = kHeadChannels[i];
            }
            add_conv(head + ".pred", config_.dense ? hw : hl, task_channels(t), 1.0);
            if (level > kFinestEstimatorLevel) {
                add_upconv(head + ".up", task_channels(t), task_channels(t));
                add_upconv(head + ".zup", kHeadChannels.back(), kZetaUpChannels);
            }
        }
    }
    if (config_.refine) {
        for (Task t : kTasks) {
            const std::string pre = std::string("ref.") + task_name(t);
            int64_t c = kHeadChannels.back() + task_channels(t);
            for (size_t i = 0; i < kRefineChannels.size(); ++i) {
                add_conv(pre + ".c" + std::to_string(i), c, kRefineChannels[i], 2.0);
                c = kRefineChannels[i];
            }
            add_conv(pre + ".res", c, task_channels(t), 0.0);
        }
    }
}

template <typename T>
int Model<T>::conv_layer_count(const std::string& prefix) const {
    int n = 0;
    for (const auto& e : params_.entries())
        if (e.name.rfind(prefix, 0) == 0 && e.name.size() > 2 && e.name.compare(e.name.size() - 2, 2, ".w") == 0) ++n;
    return n;
}

template <typename T>
void Model<T>::init_params(uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto& entries = params_.entries();
    for (size_t i = 0; i < entries.size(); ++i) {
        Tensor<T> tensor = entries[i].tensor;
        auto values = tensor.data();
        if (init_std_[i] == 0.0) {
            std::fill(values.begin(), values.end(), T(0));
            continue;
        }
        std::normal_distribution<double> dist(0.0, init_std_[i]);
        for (auto& v : values) v = static_cast<T>(dist(rng));
    }
}

template <typename T>
int64_t Model<T>::estimator_input_channels(int level) const {
    if (level < kFinestEstimatorLevel || level > kPyramidLevels)
        throw std::invalid_argument("no estimator at level " + std::to_string(level));
    const auto& c = config_.corr;
    const int64_t line = 2 * c.rx + 1;
    const int64_t window = line * (2 * c.ry + 1);
    int64_t n = kEncoderChannels[static_cast<size_t>(level - 1)] + line + window + line;
    if (config_.corr3d) n += window * (2 * c.rz + 1);
    if (level < kPyramidLevels) n += 4 + 3 * kZetaUpChannels;
    return n;
}

template <typename T>
Tensor<T> Model<T>::conv(const std::string& name, const Tensor<T>& x, int stride, int dilation, bool activate) const {
    const auto& w = params_.get(name + ".w");
    const auto& b = params_.get(name + ".b");
    const int pad = dilation * static_cast<int>(kKernel / 2);
    auto y = conv2d(x, w, b, ConvGeometry{stride, dilation, pad});
    return activate ? leaky_relu(y, static_cast<T>(kLeakySlope)) : y;
}

template <typename T>
Tensor<T> Model<T>::upconv(const std::string& name, const Tensor<T>& x) const {
    return conv2d_transpose(x, params_.get(name + ".w"), params_.get(name + ".b"), 2, 1);
}

template <typename T>
std::vector<Tensor<T>> Model<T>::encode(const Tensor<T>& image) const {
    const Shape& s = image.shape();
    if (s.c != 3) throw ShapeError("encode: expected a 3-channel image, got " + s.str());
    const int64_t unit = int64_t{1} << kPyramidLevels;
    if (s.h % unit != 0 || s.w % unit != 0 || s.h == 0 || s.w == 0)
        throw ShapeError("encode: image " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                         " is not divisible by " + std::to_string(unit) + "; pad it first");
    std::vector<Tensor<T>> pyramid;
    Tensor<T> x = image;
    for (int level = 1; level <= kPyramidLevels; ++level) {
        for (size_t i = 0; i < kEncoderStrides.size(); ++i)
            x = conv("enc.l" + std::to_string(level) + ".c" + std::to_string(i), x, kEncoderStrides[i]);
        pyramid.push_back(x);
    }
    return pyramid;
}

template <typename T>
LevelVolumes<T> Model<T>::cost_volumes(int level, const Tensor<T>& l1, const Tensor<T>& r1, const Tensor<T>& l2,
                                       const Tensor<T>& r2, const LevelPriors<T>* priors) const {
    CorrConfig c1 = config_.corr;
    Tensor<T> wr1 = r1, wl2 = l2, wr2 = r2;
    if (priors) {
        const T px = static_cast<T>(prior_to_pixels(level));
        const auto flow = scale(priors->estimate.flow, px);
        wr1 = warp_by_disparity(r1, scale(priors->estimate.disparity, px));
        wl2 = warp_by_flow(l2, flow);
        wr2 = warp_by_flow_and_change(r2, flow, scale(priors->estimate.change, px));
    }
    LevelVolumes<T> v{corr1d(l1, wr1, c1), corr2d(l1, wl2, c1), corr1d(wl2, wr2, c1), std::nullopt};
    if (config_.corr3d) v.shift = corr3d(v.disp1, v.disp2, c1);
    return v;
}

template <typename T>
Tensor<T> Model<T>::stack_volume(int level, const Tensor<T>& phi, const LevelVolumes<T>& volumes,
                                 const LevelPriors<T>* priors) const {
    if (phi.shape().c != kEncoderChannels[static_cast<size_t>(level - 1)])
        throw ShapeError("stack_volume: level " + std::to_string(level) + " features have " +
                         std::to_string(phi.shape().c) + " channels");
    const T slope = static_cast<T>(kLeakySlope);
    auto act = [&](const Tensor<T>& x) { return config_.corr.post_activation ? leaky_relu(x, slope) : x; };
    std::vector<Tensor<T>> parts{phi, act(volumes.disp1.scores), act(volumes.flow.scores), act(volumes.disp2.scores)};
    if (volumes.shift) parts.push_back(act(volumes.shift->scores));
    if (priors) {
        parts.push_back(priors->estimate.flow);
        parts.push_back(priors->estimate.disparity);
        parts.push_back(priors->estimate.change);
        parts.push_back(priors->zeta);
    }
    return concat_channels(parts);
}

template <typename T>
EstimatorOutput<T> Model<T>::estimator_forward(int level, const Tensor<T>& volume) const {
    const int64_t expected = estimator_input_channels(level);
    if (volume.shape().c != expected)
        throw ShapeError("estimator level " + std::to_string(level) + ": volume has " +
                         std::to_string(volume.shape().c) + " channels, configuration expects " +
                         std::to_string(expected));
    const std::string pre = level_prefix(level);
    const bool dense = config_.dense;

    std::vector<Tensor<T>> feats{volume};
    Tensor<T> x = volume;
    for (size_t i = 0; i < kBackboneChannels.size(); ++i) {
        x = conv(pre + ".bb" + std::to_string(i), dense ? concat_channels(feats) : x);
        feats.push_back(x);
    }
    const Tensor<T> shared = dense ? concat_channels(feats) : x;

    EstimatorOutput<T> out;
    out.level = level;
    std::vector<Tensor<T>> zeta_up;
    TaskTriple<T> up;
    for (Task t : kTasks) {
        const std::string head = pre + "." + task_name(t);
        std::vector<Tensor<T>> hf{shared};
        Tensor<T> h = shared;
        for (size_t i = 0; i < kHeadChannels.size(); ++i) {
            h = conv(head + ".h" + std::to_string(i), dense ? concat_channels(hf) : h);
            hf.push_back(h);
        }
        const size_t ti = static_cast<size_t>(t);
        out.zeta[ti] = h;
        out.estimate[t] = conv(head + ".pred", dense ? concat_channels(hf) : h, 1, 1, false);
        if (level > kFinestEstimatorLevel) {
            up[t] = upconv(head + ".up", out.estimate[t]);
            zeta_up.push_back(upconv(head + ".zup", h));
        }
    }
    if (level > kFinestEstimatorLevel) {
        out.up = up;
        out.zeta_up = concat_channels(zeta_up);
    }
    return out;
}

template <typename T>
TaskTriple<T> Model<T>::refine(const std::array<Tensor<T>, 3>& zeta, const TaskTriple<T>& estimate) const {
    if (!config_.refine) return estimate;
    TaskTriple<T> out;
    for (Task t : kTasks) {
        const std::string pre = std::string("ref.") + task_name(t);
        Tensor<T> x = concat_channels<T>({zeta[static_cast<size_t>(t)], estimate[t]});
        for (size_t i = 0; i < kRefineChannels.size(); ++i) x = conv(pre + ".c" + std::to_string(i), x, 1, kRefineDilations[i]);
        out[t] = add(estimate[t], conv(pre + ".res", x, 1, 1, false));
    }
    return out;
}

template <typename T>
TaskTriple<T> to_full_resolution(const TaskTriple<T>& quarter) {
    TaskTriple<T> out;
    for (Task t : kTasks) out[t] = scale(bilinear_upsample(quarter[t], 4), static_cast<T>(kFlowScale));
    return out;
}

template <typename T>
SceneFlowOutput<T> Model<T>::forward(const Tensor<T>& l1, const Tensor<T>& r1, const Tensor<T>& l2,
                                     const Tensor<T>& r2) const {
    for (const Tensor<T>* im : {&r1, &l2, &r2})
        if (!(im->shape() == l1.shape()))
            throw ShapeError("forward: images differ in size (" + l1.shape().str() + " vs " + im->shape().str() + ")");
    const auto pl1 = encode(l1), pr1 = encode(r1), pl2 = encode(l2), pr2 = encode(r2);

    SceneFlowOutput<T> out;
    std::optional<LevelPriors<T>> priors;
    for (int level = kPyramidLevels; level >= kFinestEstimatorLevel; --level) {
        const size_t i = static_cast<size_t>(level - 1);
        const LevelPriors<T>* p = priors ? &*priors : nullptr;
        const auto volumes = cost_volumes(level, pl1[i], pr1[i], pl2[i], pr2[i], p);
        auto est = estimator_forward(level, stack_volume(level, pl1[i], volumes, p));
        if (est.up) priors = LevelPriors<T>{*est.up, est.zeta_up};
        out.levels.push_back(std::move(est));
    }
    const auto& last = out.levels.back();
    out.quarter = refine(last.zeta, last.estimate);
    out.full = to_full_resolution(out.quarter);
    return out;
}

template class Model<float>;
template class Model<double>;
template TaskTriple<float> to_full_resolution(const TaskTriple<float>&);
template TaskTriple<double> to_full_resolution(const TaskTriple<double>&);

}  // namespace dwarf
