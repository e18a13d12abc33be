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

#include "dwarf/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dwarf/adam.hpp"
#include "dwarf/keyvalue.hpp"
#include "dwarf/ops.hpp"
#include "dwarf/warp.hpp"

namespace dwarf {

LossWeights LossWeights::pretraining() {
    LossWeights w;
    w.alpha = {0.0, 0.0, 0.005, 0.01, 0.02, 0.08, 0.32};
    w.epsilon = {1.0, 1.0, 0.5};
    w.gamma = 0.0004;
    return w;
}

LossWeights LossWeights::fine_tuning() {
    LossWeights w;
    w.alpha = {0.0, 0.0, 0.001, 0.0, 0.0, 0.0, 0.0};
    w.epsilon = {1.0, 1.0, 0.5};
    w.gamma = 0.0004;
    w.full_resolution = true;
    return w;
}

void LossWeights::validate() const {
    for (double a : alpha)
        if (!(a >= 0)) throw std::invalid_argument("loss weights: alpha must be non-negative");
    for (double e : epsilon)
        if (!(e >= 0)) throw std::invalid_argument("loss weights: epsilon must be non-negative");
    if (!(gamma >= 0)) throw std::invalid_argument("loss weights: gamma must be non-negative");
}

namespace {

// Valid-aware average of 2^level cells. Returns the mean of valid pixels per
// cell and writes cell validity into `valid`.
Tensor<float> cell_average(const Tensor<float>& x, const Tensor<float>& mask, int64_t f) {
    const Shape& s = x.shape();
    const Shape o{s.n, s.c, s.h / f, s.w / f};
    auto out = Tensor<float>::zeros(o);
    for (int64_t n = 0; n < s.n; ++n)
        for (int64_t c = 0; c < s.c; ++c)
            for (int64_t y = 0; y < o.h; ++y)
                for (int64_t x0 = 0; x0 < o.w; ++x0) {
                    double acc = 0;
                    int count = 0;
                    for (int64_t dy = 0; dy < f; ++dy)
                        for (int64_t dx = 0; dx < f; ++dx) {
                            const int64_t yy = y * f + dy, xx = x0 * f + dx;
                            if (mask.at(n, 0, yy, xx) == 0) continue;
                            acc += x.at(n, c, yy, xx);
                            ++count;
                        }
                    out.at(n, c, y, x0) = count ? static_cast<float>(acc / count) : 0.0f;
                }
    return out;
}

Tensor<float> cell_any(const Tensor<float>& mask, int64_t f) {
    const Shape& s = mask.shape();
    auto out = Tensor<float>::zeros({s.n, 1, s.h / f, s.w / f});
    for (int64_t n = 0; n < s.n; ++n)
        for (int64_t y = 0; y < s.h; ++y)
            for (int64_t x = 0; x < s.w; ++x)
                if (mask.at(n, 0, y, x) != 0) out.at(n, 0, y / f, x / f) = 1.0f;
    return out;
}

Tensor<float> scaled(const Tensor<float>& x, float factor) {
    auto out = x.clone();
    for (auto& v : out.data()) v *= factor;
    return out;
}

}  // namespace

SceneFlowField downscale_gt(const SceneFlowField& gt, int level) {
    if (level < 0 || level > kPyramidLevels) throw std::invalid_argument("downscale_gt: level out of range");
    const int64_t f = int64_t{1} << level;
    const Shape& s = gt.disparity.shape();
    if (s.h % f != 0 || s.w % f != 0)
        throw ShapeError("downscale_gt: " + s.str() + " is not divisible by " + std::to_string(f));
    const float inv = static_cast<float>(1.0 / kFlowScale);
    SceneFlowField out;
    out.flow = scaled(cell_average(gt.flow, gt.mask, f), inv);
    out.disparity = scaled(cell_average(gt.disparity, gt.mask, f), inv);
    out.change = scaled(cell_average(gt.change, gt.mask, f), inv);
    out.mask = cell_any(gt.mask, f);
    if (gt.noc.defined()) {
        auto both = gt.noc.clone();
        for (int64_t i = 0; i < both.numel(); ++i) both.data()[static_cast<size_t>(i)] *= gt.mask.data()[static_cast<size_t>(i)];
        out.noc = cell_any(both, f);
    }
    return out;
}

template <typename T>
Tensor<T> cast_tensor(const Tensor<float>& x) {
    if constexpr (std::is_same_v<T, float>) {
        return x;
    } else {
        std::vector<T> v(x.data().begin(), x.data().end());
        return Tensor<T>::from(x.shape(), std::move(v));
    }
}

template <typename T>
Tensor<T> level_data_loss(const TaskTriple<T>& estimate, const SceneFlowField& gt_level,
                          const std::array<double, 3>& epsilon) {
    const auto mask = cast_tensor<T>(gt_level.mask);
    auto term = [&](const Tensor<T>& pred, const Tensor<float>& target, double eps) {
        return scale(masked_l1(pred, cast_tensor<T>(target), mask), static_cast<T>(eps));
    };
    return add(add(term(estimate.disparity, gt_level.disparity, epsilon[0]),
                   term(estimate.change, gt_level.change, epsilon[1])),
               term(estimate.flow, gt_level.flow, epsilon[2]));
}

template <typename T>
LossTerms<T> multiscale_loss(const SceneFlowOutput<T>& outputs, const SceneFlowField& gt, const LossWeights& weights,
                             const ParamStore<T>* params) {
    weights.validate();
    LossTerms<T> terms;
    std::vector<Tensor<T>> parts;
    auto supervise = [&](const TaskTriple<T>& estimate, int level, double alpha) {
        if (alpha == 0) return;
        const auto g = downscale_gt(gt, level);
        bool any = false;
        for (float m : g.mask.data()) any = any || m != 0;
        if (!any) {
            terms.empty_mask = true;
            return;
        }
        parts.push_back(scale(level_data_loss(estimate, g, weights.epsilon), static_cast<T>(alpha)));
    };
    if (weights.full_resolution) {
        TaskTriple<T> units;
        for (Task t : kTasks) units[t] = scale(outputs.full[t], static_cast<T>(1.0 / kFlowScale));
        supervise(units, 0, weights.alpha[kFinestEstimatorLevel]);
    } else {
        for (const auto& lv : outputs.levels) {
            const bool finest = lv.level == kFinestEstimatorLevel && outputs.quarter.flow.defined();
            supervise(finest ? outputs.quarter : lv.estimate, lv.level, weights.alpha[static_cast<size_t>(lv.level)]);
        }
    }
    Tensor<T> data = Tensor<T>::scalar(T(0));
    for (const auto& p : parts) data = add(data, p);
    terms.data = static_cast<double>(data.item());

    Tensor<T> reg = Tensor<T>::scalar(T(0));
    if (params && weights.gamma > 0) {
        for (const auto& e : params->entries())
            reg = add(reg, weights.norm == RegularizerNorm::SquaredL2 ? sum_squares(e.tensor) : sum_abs(e.tensor));
        if (weights.norm == RegularizerNorm::SquaredL1) reg = mul(reg, reg);
        reg = scale(reg, static_cast<T>(weights.gamma));
    }
    terms.regularizer = static_cast<double>(reg.item());
    terms.total = add(data, reg);
    return terms;
}

// ---------------------------------------------------------------------------
// Augmentation

Tensor<float> apply_photometric(const Tensor<float>& image, const PhotometricDraw& draw) {
    auto out = image.clone();
    const Shape& s = out.shape();
    for (int64_t n = 0; n < s.n; ++n)
        for (int64_t c = 0; c < s.c; ++c) {
            const double k = draw.brightness * draw.color[static_cast<size_t>(c % 3)];
            float* p = out.ptr() + (n * s.c + c) * s.plane();
            for (int64_t i = 0; i < s.plane(); ++i) {
                const double v = std::pow(std::max(0.0, static_cast<double>(p[i])), draw.gamma) * k;
                p[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    return out;
}

SceneSample augment_photometric(const SceneSample& sample, const AugmentSpec& spec, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto draw = [&] {
        PhotometricDraw d;
        d.gamma = spec.gamma_min + (spec.gamma_max - spec.gamma_min) * u01(rng);
        d.brightness = spec.brightness_min + (spec.brightness_max - spec.brightness_min) * u01(rng);
        for (auto& c : d.color) c = spec.color_min + (spec.color_max - spec.color_min) * u01(rng);
        return d;
    };
    SceneSample out = sample;
    out.l1 = apply_photometric(sample.l1, draw());
    out.r1 = apply_photometric(sample.r1, draw());
    out.l2 = apply_photometric(sample.l2, draw());
    out.r2 = apply_photometric(sample.r2, draw());
    return out;
}

namespace {

// Source coordinate of output pixel i under a zoom about the centre.
double zoom_source(int64_t i, int64_t size, double z) {
    const double c = 0.5 * static_cast<double>(size - 1);
    return (static_cast<double>(i) - c) / z + c;
}

Tensor<float> zoom_bilinear(const Tensor<float>& x, double z) {
    const Shape& s = x.shape();
    auto out = Tensor<float>::zeros(s);
    for (int64_t y = 0; y < s.h; ++y) {
        const double sy = std::clamp(zoom_source(y, s.h, z), 0.0, static_cast<double>(s.h - 1));
        const int64_t y0 = static_cast<int64_t>(std::floor(sy)), y1 = std::min(y0 + 1, s.h - 1);
        const double wy = sy - static_cast<double>(y0);
        for (int64_t xx = 0; xx < s.w; ++xx) {
            const double sx = std::clamp(zoom_source(xx, s.w, z), 0.0, static_cast<double>(s.w - 1));
            const int64_t x0 = static_cast<int64_t>(std::floor(sx)), x1 = std::min(x0 + 1, s.w - 1);
            const double wx = sx - static_cast<double>(x0);
            for (int64_t n = 0; n < s.n; ++n)
                for (int64_t c = 0; c < s.c; ++c)
                    out.at(n, c, y, xx) = static_cast<float>(
                        (1 - wy) * ((1 - wx) * x.at(n, c, y0, x0) + wx * x.at(n, c, y0, x1)) +
                        wy * ((1 - wx) * x.at(n, c, y1, x0) + wx * x.at(n, c, y1, x1)));
        }
    }
    return out;
}

Tensor<float> zoom_nearest(const Tensor<float>& x, double z, float factor) {
    const Shape& s = x.shape();
    auto out = Tensor<float>::zeros(s);
    for (int64_t y = 0; y < s.h; ++y) {
        const int64_t sy = std::clamp<int64_t>(std::llround(zoom_source(y, s.h, z)), 0, s.h - 1);
        for (int64_t xx = 0; xx < s.w; ++xx) {
            const int64_t sx = std::clamp<int64_t>(std::llround(zoom_source(xx, s.w, z)), 0, s.w - 1);
            for (int64_t n = 0; n < s.n; ++n)
                for (int64_t c = 0; c < s.c; ++c) out.at(n, c, y, xx) = x.at(n, c, sy, sx) * factor;
        }
    }
    return out;
}

Tensor<float> crop_tensor(const Tensor<float>& x, int64_t x0, int64_t y0, int64_t w, int64_t h) {
    const Shape& s = x.shape();
    auto out = Tensor<float>::zeros({s.n, s.c, h, w});
    for (int64_t n = 0; n < s.n; ++n)
        for (int64_t c = 0; c < s.c; ++c)
            for (int64_t y = 0; y < h; ++y)
                std::copy_n(x.ptr() + ((n * s.c + c) * s.h + y0 + y) * s.w + x0, w, out.ptr() + ((n * s.c + c) * h + y) * w);
    return out;
}

Tensor<float> pad_tensor(const Tensor<float>& x, int64_t w, int64_t h) {
    const Shape& s = x.shape();
    auto out = Tensor<float>::zeros({s.n, s.c, h, w});
    for (int64_t n = 0; n < s.n; ++n)
        for (int64_t c = 0; c < s.c; ++c)
            for (int64_t y = 0; y < s.h; ++y)
                std::copy_n(x.ptr() + ((n * s.c + c) * s.h + y) * s.w, s.w, out.ptr() + ((n * s.c + c) * h + y) * w);
    return out;
}

template <typename F>
SceneSample map_sample(const SceneSample& s, F&& images, F&& truth) {
    SceneSample out;
    out.provenance = s.provenance;
    out.l1 = images(s.l1);
    out.r1 = images(s.r1);
    out.l2 = images(s.l2);
    out.r2 = images(s.r2);
    out.gt.flow = truth(s.gt.flow);
    out.gt.disparity = truth(s.gt.disparity);
    out.gt.change = truth(s.gt.change);
    out.gt.mask = truth(s.gt.mask);
    if (s.gt.noc.defined()) out.gt.noc = truth(s.gt.noc);
    return out;
}

}  // namespace

SceneSample apply_zoom(const SceneSample& sample, double z) {
    if (!(z > 0)) throw std::invalid_argument("apply_zoom: factor must be positive");
    SceneSample out = sample;
    for (auto* im : {&out.l1, &out.r1, &out.l2, &out.r2}) *im = zoom_bilinear(*im, z);
    const float m = static_cast<float>(z);
    out.gt.flow = zoom_nearest(sample.gt.flow, z, m);
    out.gt.disparity = zoom_nearest(sample.gt.disparity, z, m);
    out.gt.change = zoom_nearest(sample.gt.change, z, m);
    out.gt.mask = zoom_nearest(sample.gt.mask, z, 1.0f);
    if (sample.gt.noc.defined()) out.gt.noc = zoom_nearest(sample.gt.noc, z, 1.0f);
    return out;
}

SceneSample augment_zoom(const SceneSample& sample, const AugmentSpec& spec, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const bool apply = u01(rng) < spec.zoom_probability;
    const double z = spec.zoom_min + (spec.zoom_max - spec.zoom_min) * u01(rng);
    return apply ? apply_zoom(sample, z) : sample;
}

SceneSample pad_sample(const SceneSample& sample, int width, int height) {
    const Shape& s = sample.l1.shape();
    const int64_t w = std::max<int64_t>(width, s.w), h = std::max<int64_t>(height, s.h);
    if (w == s.w && h == s.h) return sample;
    auto f = [&](const Tensor<float>& x) { return pad_tensor(x, w, h); };
    return map_sample(sample, f, f);
}

SceneSample crop_sample(const SceneSample& sample, int x0, int y0, int width, int height) {
    const Shape& s = sample.l1.shape();
    if (x0 < 0 || y0 < 0 || x0 + width > s.w || y0 + height > s.h)
        throw ShapeError("crop " + std::to_string(width) + "x" + std::to_string(height) + " at (" +
                         std::to_string(x0) + ", " + std::to_string(y0) + ") exceeds " + s.str());
    auto f = [&](const Tensor<float>& x) { return crop_tensor(x, x0, y0, width, height); };
    return map_sample(sample, f, f);
}

SceneSample random_crop(const SceneSample& sample, int width, int height, std::mt19937_64& rng) {
    const Shape& s = sample.l1.shape();
    if (width > s.w || height > s.h)
        throw ShapeError("crop " + std::to_string(width) + "x" + std::to_string(height) + " exceeds " + s.str());
    std::uniform_int_distribution<int64_t> ux(0, s.w - width), uy(0, s.h - height);
    const int64_t x0 = ux(rng), y0 = uy(rng);
    return crop_sample(sample, static_cast<int>(x0), static_cast<int>(y0), width, height);
}

// ---------------------------------------------------------------------------
// Schedules

const char* distill_mode_name(DistillMode m) {
    switch (m) {
        case DistillMode::GtOnly: return "gt";
        case DistillMode::PxOnly: return "px";
        case DistillMode::PxPlusGt: return "px+gt";
        case DistillMode::PxThenGt: return "px->gt";
    }
    return "?";
}

DistillMode parse_distill_mode(const std::string& name) {
    for (auto m : {DistillMode::GtOnly, DistillMode::PxOnly, DistillMode::PxPlusGt, DistillMode::PxThenGt})
        if (name == distill_mode_name(m)) return m;
    throw std::invalid_argument("unknown distillation mode '" + name + "' (gt, px, px+gt, px->gt)");
}

double TrainSchedule::lr_at(int64_t step) const {
    double lr = learning_rate;
    for (size_t i = 0; i < decay_steps.size(); ++i)
        if (step >= decay_steps[i]) lr *= i < decay_factors.size() ? decay_factors[i] : 0.5;
    return lr;
}

void TrainSchedule::validate() const {
    auto fail = [&](const std::string& why) { throw std::invalid_argument("schedule " + name + ": " + why); };
    if (total_steps < 0) fail("total steps must be non-negative");
    if (batch_size < 1) fail("batch size must be positive");
    if (crop_width < 0 || crop_height < 0) fail("crop size must be non-negative");
    if (!(learning_rate > 0)) fail("learning rate must be positive");
    if (decay_factors.size() != decay_steps.size()) fail("decay steps and factors differ in length");
    for (size_t i = 0; i < decay_steps.size(); ++i) {
        if (i > 0 && decay_steps[i] <= decay_steps[i - 1]) fail("decay points must be strictly increasing");
        if (decay_steps[i] >= total_steps) fail("decay point " + std::to_string(decay_steps[i]) + " is not below the step count");
        if (!(decay_factors[i] > 0)) fail("decay factors must be positive");
    }
    if (mode == DistillMode::PxThenGt && (split_step < 0 || split_step > total_steps)) fail("split step outside [0, steps]");
    weights.validate();
}

namespace {

std::string join(const std::vector<int64_t>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

template <typename V>
std::vector<V> split_list(const std::string& text, const std::string& key) {
    std::vector<V> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::istringstream is(item);
        V v{};
        if (!(is >> v)) throw std::invalid_argument("schedule: bad value '" + item + "' in " + key);
        out.push_back(v);
    }
    return out;
}

}  // namespace

std::string TrainSchedule::to_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "name = " << name << "\nsteps = " << total_steps << "\nbatch = " << batch_size << "\ncrop_width = " << crop_width
       << "\ncrop_height = " << crop_height << "\n";
    if (pad) os << "pad_width = " << (*pad)[0] << "\npad_height = " << (*pad)[1] << "\n";
    os << "lr = " << learning_rate << "\ndecay_steps = " << join(decay_steps) << "\ndecay_factors = ";
    for (size_t i = 0; i < decay_factors.size(); ++i) os << (i ? "," : "") << decay_factors[i];
    os << "\nloss = " << (loss == LossPreset::Pretraining ? "pretraining" : "fine_tuning")
       << "\naugment = " << (augment_enabled ? "true" : "false") << "\nmode = " << distill_mode_name(mode)
       << "\nsplit = " << split_step << "\n";
    return os.str();
}

TrainSchedule TrainSchedule::parse(const std::string& text, const std::string& source) {
    const auto kv = KeyValues::parse(text, source);
    kv.require_known({"preset", "name", "steps", "batch", "crop_width", "crop_height", "pad_width", "pad_height", "lr",
                      "decay_steps", "decay_factors", "loss", "alpha", "epsilon", "gamma", "regularizer", "augment",
                      "zoom_probability", "mode", "split"});
    TrainSchedule s;
    if (kv.has("preset")) s = make_schedule(kv.get("preset", ""));
    s.name = kv.get("name", s.name);
    s.total_steps = kv.get_int("steps", s.total_steps);
    s.batch_size = static_cast<int>(kv.get_int("batch", s.batch_size));
    s.crop_width = static_cast<int>(kv.get_int("crop_width", s.crop_width));
    s.crop_height = static_cast<int>(kv.get_int("crop_height", s.crop_height));
    if (kv.has("pad_width") || kv.has("pad_height"))
        s.pad = std::array<int, 2>{static_cast<int>(kv.get_int("pad_width", s.pad ? (*s.pad)[0] : 0)),
                                   static_cast<int>(kv.get_int("pad_height", s.pad ? (*s.pad)[1] : 0))};
    s.learning_rate = kv.get_double("lr", s.learning_rate);
    if (kv.has("decay_steps")) {
        s.decay_steps = split_list<int64_t>(kv.get("decay_steps", ""), "decay_steps");
        s.decay_factors.assign(s.decay_steps.size(), 0.5);
    }
    if (kv.has("decay_factors")) s.decay_factors = split_list<double>(kv.get("decay_factors", ""), "decay_factors");
    if (kv.has("loss")) {
        const auto name = kv.get("loss", "");
        if (name == "pretraining") {
            s.loss = LossPreset::Pretraining;
            s.weights = LossWeights::pretraining();
        } else if (name == "fine_tuning") {
            s.loss = LossPreset::FineTuning;
            s.weights = LossWeights::fine_tuning();
        } else {
            throw std::invalid_argument(source + ": loss must be pretraining or fine_tuning, got '" + name + "'");
        }
    }
    if (kv.has("alpha")) {
        const auto a = split_list<double>(kv.get("alpha", ""), "alpha");
        if (a.size() != 5) throw std::invalid_argument(source + ": alpha lists levels 6..2 (5 values)");
        for (size_t i = 0; i < 5; ++i) s.weights.alpha[6 - i] = a[i];
    }
    if (kv.has("epsilon")) {
        const auto e = split_list<double>(kv.get("epsilon", ""), "epsilon");
        if (e.size() != 3) throw std::invalid_argument(source + ": epsilon needs 3 values");
        std::copy(e.begin(), e.end(), s.weights.epsilon.begin());
    }
    s.weights.gamma = kv.get_double("gamma", s.weights.gamma);
    if (kv.has("regularizer")) {
        const auto r = kv.get("regularizer", "");
        if (r == "l2") s.weights.norm = RegularizerNorm::SquaredL2;
        else if (r == "l1sq") s.weights.norm = RegularizerNorm::SquaredL1;
        else throw std::invalid_argument(source + ": regularizer must be l2 or l1sq, got '" + r + "'");
    }
    s.augment_enabled = kv.get_bool("augment", s.augment_enabled);
    s.augment.zoom_probability = kv.get_double("zoom_probability", s.augment.zoom_probability);
    if (kv.has("mode")) s.mode = parse_distill_mode(kv.get("mode", ""));
    s.split_step = kv.get_int("split", s.split_step);
    s.validate();
    return s;
}

TrainSchedule TrainSchedule::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open schedule " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

TrainSchedule make_schedule(const std::string& preset) {
    TrainSchedule s;
    s.name = preset;
    s.batch_size = 4;
    if (preset == "flyingthings") {
        s.total_steps = 1'200'000;
        s.crop_width = 768;
        s.crop_height = 384;
        s.learning_rate = 1e-4;
        s.decay_steps = {400'000, 600'000, 800'000, 1'000'000};
        s.loss = LossPreset::Pretraining;
        s.weights = LossWeights::pretraining();
        s.mode = DistillMode::GtOnly;
    } else if (preset == "kitti_ft" || preset == "distilled_ft") {
        s.total_steps = 50'000;
        s.pad = std::array<int, 2>{1280, 384};
        s.crop_width = 896;
        s.crop_height = 320;
        s.learning_rate = 3e-5;
        s.decay_steps = {25'000, 35'000, 45'000};
        s.loss = LossPreset::FineTuning;
        s.weights = LossWeights::fine_tuning();
        if (preset == "distilled_ft") {
            s.mode = DistillMode::PxThenGt;
            s.split_step = 40'000;
        }
    } else {
        throw std::invalid_argument("unknown schedule preset '" + preset + "' (flyingthings, kitti_ft, distilled_ft)");
    }
    s.decay_factors.assign(s.decay_steps.size(), 0.5);
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// Training loop

SceneSample prepare_sample(const std::vector<SceneSample>& dataset, const std::vector<size_t>& pool,
                           const TrainSchedule& schedule, uint64_t seed, int64_t step, int slot) {
    if (pool.empty()) throw std::invalid_argument("prepare_sample: empty pool");
    std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), static_cast<uint32_t>(step),
                      static_cast<uint32_t>(step >> 32), static_cast<uint32_t>(slot)};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
    SceneSample s = dataset[pool[pick(rng)]];
    if (schedule.pad) s = pad_sample(s, (*schedule.pad)[0], (*schedule.pad)[1]);
    if (schedule.augment_enabled) {
        s = augment_zoom(s, schedule.augment, rng);
        if (schedule.augment.photometric) s = augment_photometric(s, schedule.augment, rng);
    }
    if (schedule.crop_width > 0 && schedule.crop_height > 0) s = random_crop(s, schedule.crop_width, schedule.crop_height, rng);
    return s;
}

namespace {

struct Pools {
    std::vector<size_t> gt, px, both;
};

Pools split_pools(const std::vector<SceneSample>& dataset) {
    Pools p;
    for (size_t i = 0; i < dataset.size(); ++i) {
        (dataset[i].provenance == Provenance::Gt ? p.gt : p.px).push_back(i);
        p.both.push_back(i);
    }
    return p;
}

void check_dataset(const std::vector<SceneSample>& dataset, const Pools& pools, const TrainSchedule& s) {
    const bool need_gt = s.mode == DistillMode::GtOnly || s.mode == DistillMode::PxPlusGt ||
                         (s.mode == DistillMode::PxThenGt && s.split_step < s.total_steps);
    const bool need_px = s.mode == DistillMode::PxOnly || s.mode == DistillMode::PxPlusGt ||
                         (s.mode == DistillMode::PxThenGt && s.split_step > 0);
    const std::string mode = distill_mode_name(s.mode);
    if (s.total_steps > 0 && need_gt && pools.gt.empty())
        throw std::invalid_argument("mode " + mode + " needs ground-truth (gt) samples; the dataset has none");
    if (s.total_steps > 0 && need_px && pools.px.empty())
        throw std::invalid_argument("mode " + mode + " needs proxy (px) samples; the dataset has none");
    for (size_t i = 0; i < dataset.size(); ++i) {
        Shape sh = dataset[i].l1.shape();
        if (s.pad) {
            sh.w = std::max<int64_t>(sh.w, (*s.pad)[0]);
            sh.h = std::max<int64_t>(sh.h, (*s.pad)[1]);
        }
        const int64_t w = s.crop_width > 0 ? s.crop_width : sh.w, h = s.crop_height > 0 ? s.crop_height : sh.h;
        if (w > sh.w || h > sh.h)
            throw std::invalid_argument("sample " + std::to_string(i) + " (" + std::to_string(sh.w) + "x" +
                                        std::to_string(sh.h) + ") is smaller than the crop");
        if (w % 64 != 0 || h % 64 != 0)
            throw std::invalid_argument("training size " + std::to_string(w) + "x" + std::to_string(h) +
                                        " is not divisible by 64");
    }
}

}  // namespace

template <typename T>
std::vector<StepLog> train(Model<T>& model, const std::vector<SceneSample>& dataset, const TrainSchedule& schedule,
                           uint64_t seed, const TrainOptions& options) {
    schedule.validate();
    const Pools pools = split_pools(dataset);
    check_dataset(dataset, pools, schedule);

    std::ofstream log_file;
    if (options.log_path) {
        log_file.open(*options.log_path);
        if (!log_file) throw std::runtime_error("cannot write log " + options.log_path->string());
        log_file << "step,loss,data_loss,reg_loss,lr,pool\n";
        log_file.precision(9);
    }

    auto tensors = model.params().tensors();
    AdamState<T> adam;
    std::vector<StepLog> log;
    log.reserve(static_cast<size_t>(schedule.total_steps));
    for (int64_t step = 0; step < schedule.total_steps; ++step) {
        const std::vector<size_t>* pool = &pools.both;
        std::string pool_name = "px+gt";
        switch (schedule.mode) {
            case DistillMode::GtOnly: pool = &pools.gt, pool_name = "gt"; break;
            case DistillMode::PxOnly: pool = &pools.px, pool_name = "px"; break;
            case DistillMode::PxPlusGt: break;
            case DistillMode::PxThenGt:
                if (step < schedule.split_step) pool = &pools.px, pool_name = "px";
                else pool = &pools.gt, pool_name = "gt";
                break;
        }
        StepLog entry;
        entry.step = step;
        entry.lr = schedule.lr_at(step);
        entry.pool = pool_name;
        model.params().zero_grad();
        bool empty = false;
        for (int slot = 0; slot < schedule.batch_size; ++slot) {
            const SceneSample s = prepare_sample(dataset, *pool, schedule, seed, step, slot);
            const auto out = model.forward(cast_tensor<T>(s.l1), cast_tensor<T>(s.r1), cast_tensor<T>(s.l2),
                                           cast_tensor<T>(s.r2));
            const auto terms = multiscale_loss(out, s.gt, schedule.weights, slot == 0 ? &model.params() : nullptr);
            backward(terms.total);
            entry.data_loss += terms.data;
            entry.reg_loss += terms.regularizer;
            empty = empty || terms.empty_mask;
        }
        entry.loss = entry.data_loss + entry.reg_loss;
        if (empty) std::cerr << "warning: step " << step << ": a supervised level has no valid ground truth\n";
        if (adam_step(std::span<Tensor<T>>(tensors), adam, entry.lr) == AdamOutcome::SkippedNonFinite)
            std::cerr << "warning: step " << step << ": non-finite gradient, update skipped\n";
        if (log_file)
            log_file << entry.step << ',' << entry.loss << ',' << entry.data_loss << ',' << entry.reg_loss << ','
                     << entry.lr << ',' << entry.pool << '\n';
        if (options.on_step) options.on_step(entry);
        const bool stop = options.stop_after && options.stop_after(entry);
        log.push_back(std::move(entry));
        if (stop) break;
    }
    model.params().zero_grad();
    return log;
}

#define DWARF_INSTANTIATE_TRAINING(T)                                                                                 \
    template Tensor<T> cast_tensor<T>(const Tensor<float>&);                                                          \
    template Tensor<T> level_data_loss(const TaskTriple<T>&, const SceneFlowField&, const std::array<double, 3>&);   \
    template LossTerms<T> multiscale_loss(const SceneFlowOutput<T>&, const SceneFlowField&, const LossWeights&,      \
                                          const ParamStore<T>*);                                                      \
    template std::vector<StepLog> train(Model<T>&, const std::vector<SceneSample>&, const TrainSchedule&, uint64_t,  \
                                        const TrainOptions&);

DWARF_INSTANTIATE_TRAINING(float)
DWARF_INSTANTIATE_TRAINING(double)

}  // namespace dwarf
