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

#include "dwarf/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "dwarf/training.hpp"

namespace dwarf {

namespace {

void require_aligned(const Tensor<float>& pred, const Tensor<float>& gt, const Tensor<float>& mask) {
    if (!(pred.shape() == gt.shape()))
        throw ShapeError("metric: prediction " + pred.shape().str() + " vs ground truth " + gt.shape().str());
    const Shape& m = mask.shape();
    if (!m.spatially_equal(gt.shape()) || m.c != 1)
        throw ShapeError("metric: mask " + m.str() + " does not align with " + gt.shape().str());
}

// Error and ground-truth magnitude at one pixel.
std::pair<double, double> pixel_error(const Tensor<float>& pred, const Tensor<float>& gt, int64_t n, int64_t y, int64_t x) {
    double err2 = 0, mag2 = 0;
    for (int64_t c = 0; c < gt.shape().c; ++c) {
        const double d = static_cast<double>(pred.at(n, c, y, x)) - gt.at(n, c, y, x);
        err2 += d * d;
        mag2 += static_cast<double>(gt.at(n, c, y, x)) * gt.at(n, c, y, x);
    }
    return {std::sqrt(err2), std::sqrt(mag2)};
}

bool is_outlier(double err, double mag) { return err > kOutlierAbsolute && err > kOutlierRelative * mag; }

std::optional<double> ratio(double num, int64_t den, double scale = 1.0) {
    if (den == 0) return std::nullopt;
    return scale * num / static_cast<double>(den);
}

}  // namespace

std::optional<double> epe(const Tensor<float>& pred, const Tensor<float>& gt, const Tensor<float>& mask) {
    require_aligned(pred, gt, mask);
    const Shape& s = gt.shape();
    double sum = 0;
    int64_t count = 0;
    for (int64_t n = 0; n < s.n; ++n)
        for (int64_t y = 0; y < s.h; ++y)
            for (int64_t x = 0; x < s.w; ++x) {
                if (mask.at(n, 0, y, x) == 0) continue;
                sum += pixel_error(pred, gt, n, y, x).first;
                ++count;
            }
    return ratio(sum, count);
}

Tensor<float> outlier_map(const Tensor<float>& pred, const Tensor<float>& gt, const Tensor<float>& mask) {
    require_aligned(pred, gt, mask);
    const Shape& s = gt.shape();
    auto out = Tensor<float>::zeros({s.n, 1, s.h, s.w});
    for (int64_t n = 0; n < s.n; ++n)
        for (int64_t y = 0; y < s.h; ++y)
            for (int64_t x = 0; x < s.w; ++x) {
                if (mask.at(n, 0, y, x) == 0) continue;
                const auto [err, mag] = pixel_error(pred, gt, n, y, x);
                out.at(n, 0, y, x) = is_outlier(err, mag) ? 1.0f : 0.0f;
            }
    return out;
}

std::optional<double> outlier_rate(const Tensor<float>& pred, const Tensor<float>& gt, const Tensor<float>& mask) {
    const auto map = outlier_map(pred, gt, mask);
    double bad = 0;
    int64_t count = 0;
    for (int64_t i = 0; i < mask.numel(); ++i) {
        if (mask.data()[static_cast<size_t>(i)] == 0) continue;
        bad += map.data()[static_cast<size_t>(i)];
        ++count;
    }
    return ratio(bad, count, 100.0);
}

std::optional<double> sf_all(const Tensor<float>& d1_outliers, const Tensor<float>& d2_outliers,
                             const Tensor<float>& f1_outliers, const Tensor<float>& mask) {
    for (const auto* m : {&d1_outliers, &d2_outliers, &f1_outliers})
        if (!(m->shape() == mask.shape()))
            throw ShapeError("sf_all: outlier map " + m->shape().str() + " does not align with mask " + mask.shape().str());
    int64_t bad = 0, count = 0;
    for (int64_t i = 0; i < mask.numel(); ++i) {
        const auto k = static_cast<size_t>(i);
        if (mask.data()[k] == 0) continue;
        ++count;
        if (d1_outliers.data()[k] != 0 || d2_outliers.data()[k] != 0 || f1_outliers.data()[k] != 0) ++bad;
    }
    return ratio(static_cast<double>(bad), count, 100.0);
}

void MetricCounts::merge(const MetricCounts& o) {
    valid += o.valid;
    for (int i = 0; i < 3; ++i) {
        epe_sum[i] += o.epe_sum[i];
        outliers[i] += o.outliers[i];
    }
    sf_outliers += o.sf_outliers;
}

void MetricReport::add(const SceneFlowField& pred, const SceneFlowField& gt) {
    require_aligned(pred.disparity, gt.disparity, gt.mask);
    require_aligned(pred.change, gt.change, gt.mask);
    require_aligned(pred.flow, gt.flow, gt.mask);
    const bool noc_here = gt.noc.defined();
    if (samples > 0 && noc_here != has_noc) has_noc = false;
    else has_noc = noc_here;
    const Tensor<float>* fields[3] = {&pred.disparity, &pred.change, &pred.flow};
    const Tensor<float>* truths[3] = {&gt.disparity, &gt.change, &gt.flow};
    const Shape& s = gt.disparity.shape();
    for (int64_t n = 0; n < s.n; ++n)
        for (int64_t y = 0; y < s.h; ++y)
            for (int64_t x = 0; x < s.w; ++x) {
                if (gt.mask.at(n, 0, y, x) == 0) continue;
                const bool in_noc = noc_here && gt.noc.at(n, 0, y, x) != 0;
                bool any = false;
                for (int t = 0; t < 3; ++t) {
                    const auto [err, mag] = pixel_error(*fields[t], *truths[t], n, y, x);
                    const bool bad = is_outlier(err, mag);
                    any = any || bad;
                    all.epe_sum[t] += err;
                    all.outliers[t] += bad;
                    if (in_noc) {
                        noc.epe_sum[t] += err;
                        noc.outliers[t] += bad;
                    }
                }
                ++all.valid;
                all.sf_outliers += any;
                if (in_noc) {
                    ++noc.valid;
                    noc.sf_outliers += any;
                }
            }
    ++samples;
}

void MetricReport::merge(const MetricReport& o) {
    if (o.samples == 0) return;
    has_noc = samples == 0 ? o.has_noc : has_noc && o.has_noc;
    all.merge(o.all);
    noc.merge(o.noc);
    samples += o.samples;
}

std::optional<double> MetricReport::epe_d1() const { return ratio(all.epe_sum[0], all.valid); }
std::optional<double> MetricReport::epe_d2() const { return ratio(all.epe_sum[1], all.valid); }
std::optional<double> MetricReport::epe_f1() const { return ratio(all.epe_sum[2], all.valid); }
std::optional<double> MetricReport::d1_all() const { return ratio(static_cast<double>(all.outliers[0]), all.valid, 100); }
std::optional<double> MetricReport::d2_all() const { return ratio(static_cast<double>(all.outliers[1]), all.valid, 100); }
std::optional<double> MetricReport::f1_all() const { return ratio(static_cast<double>(all.outliers[2]), all.valid, 100); }
std::optional<double> MetricReport::sf_all() const { return ratio(static_cast<double>(all.sf_outliers), all.valid, 100); }
std::optional<double> MetricReport::d1_noc() const {
    return has_noc ? ratio(static_cast<double>(noc.outliers[0]), noc.valid, 100) : std::nullopt;
}
std::optional<double> MetricReport::d2_noc() const {
    return has_noc ? ratio(static_cast<double>(noc.outliers[1]), noc.valid, 100) : std::nullopt;
}
std::optional<double> MetricReport::f1_noc() const {
    return has_noc ? ratio(static_cast<double>(noc.outliers[2]), noc.valid, 100) : std::nullopt;
}
std::optional<double> MetricReport::sf_noc() const {
    return has_noc ? ratio(static_cast<double>(noc.sf_outliers), noc.valid, 100) : std::nullopt;
}

namespace {

std::string fmt(const std::optional<double>& v, int digits) {
    if (!v) return "nan";
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << *v;
    return os.str();
}

}  // namespace

std::string MetricReport::to_key_values() const {
    std::ostringstream os;
    os << "samples=" << samples << "\nvalid_pixels=" << all.valid << "\n";
    os << "epe_d1=" << fmt(epe_d1(), 6) << "\nepe_d2=" << fmt(epe_d2(), 6) << "\nepe_f1=" << fmt(epe_f1(), 6) << "\n";
    os << "d1_all=" << fmt(d1_all(), 4) << "\nd2_all=" << fmt(d2_all(), 4) << "\nf1_all=" << fmt(f1_all(), 4)
       << "\nsf_all=" << fmt(sf_all(), 4) << "\n";
    if (has_noc)
        os << "noc_pixels=" << noc.valid << "\nd1_noc=" << fmt(d1_noc(), 4) << "\nd2_noc=" << fmt(d2_noc(), 4)
           << "\nf1_noc=" << fmt(f1_noc(), 4) << "\nsf_noc=" << fmt(sf_noc(), 4) << "\n";
    return os.str();
}

std::string MetricReport::to_table() const {
    std::ostringstream os;
    os << std::left << std::setw(6) << "" << std::right << std::setw(9) << "D1" << std::setw(9) << "D2" << std::setw(9)
       << "F1" << std::setw(9) << "SF" << "\n";
    os << std::left << std::setw(6) << "All" << std::right << std::setw(9) << fmt(d1_all(), 2) << std::setw(9)
       << fmt(d2_all(), 2) << std::setw(9) << fmt(f1_all(), 2) << std::setw(9) << fmt(sf_all(), 2) << "\n";
    if (has_noc)
        os << std::left << std::setw(6) << "Noc" << std::right << std::setw(9) << fmt(d1_noc(), 2) << std::setw(9)
           << fmt(d2_noc(), 2) << std::setw(9) << fmt(f1_noc(), 2) << std::setw(9) << fmt(sf_noc(), 2) << "\n";
    os << std::left << std::setw(6) << "EPE" << std::right << std::setw(9) << fmt(epe_d1(), 3) << std::setw(9)
       << fmt(epe_d2(), 3) << std::setw(9) << fmt(epe_f1(), 3) << "\n";
    os << all.valid << " valid pixels in " << samples << " samples\n";
    return os.str();
}

MetricReport evaluate(const SceneFlowField& pred, const SceneFlowField& gt) {
    MetricReport r;
    r.add(pred, gt);
    return r;
}

SceneFlowField to_field(const TaskTriple<float>& full) {
    SceneFlowField f;
    f.flow = full.flow.detach();
    f.disparity = full.disparity.detach();
    f.change = full.change.detach();
    const Shape& s = f.disparity.shape();
    f.mask = Tensor<float>::full({s.n, 1, s.h, s.w}, 1.0f);
    return f;
}

template <typename T>
SceneFlowField predict(const Model<T>& model, const Tensor<float>& l1, const Tensor<float>& r1, const Tensor<float>& l2,
                       const Tensor<float>& r2) {
    const Shape& s = l1.shape();
    for (const auto* im : {&r1, &l2, &r2})
        if (!(im->shape() == s)) throw ShapeError("predict: images differ in size (" + s.str() + " vs " + im->shape().str() + ")");
    const int64_t h = (s.h + 63) / 64 * 64, w = (s.w + 63) / 64 * 64;
    SceneSample padded;
    padded.l1 = l1;
    padded.r1 = r1;
    padded.l2 = l2;
    padded.r2 = r2;
    padded.gt.disparity = padded.gt.change = padded.gt.mask = Tensor<float>::zeros({s.n, 1, s.h, s.w});
    padded.gt.flow = Tensor<float>::zeros({s.n, 2, s.h, s.w});
    padded = pad_sample(padded, static_cast<int>(w), static_cast<int>(h));
    NoGradGuard guard;
    const auto out = model.forward(cast_tensor<T>(padded.l1), cast_tensor<T>(padded.r1), cast_tensor<T>(padded.l2),
                                   cast_tensor<T>(padded.r2));
    auto back = [&](const Tensor<T>& t) {
        const Shape& ts = t.shape();
        auto r = Tensor<float>::zeros({ts.n, ts.c, s.h, s.w});
        for (int64_t n = 0; n < ts.n; ++n)
            for (int64_t c = 0; c < ts.c; ++c)
                for (int64_t y = 0; y < s.h; ++y)
                    for (int64_t x = 0; x < s.w; ++x) r.at(n, c, y, x) = static_cast<float>(t.at(n, c, y, x));
        return r;
    };
    SceneFlowField f;
    f.flow = back(out.full.flow);
    f.disparity = back(out.full.disparity);
    f.change = back(out.full.change);
    f.mask = Tensor<float>::full({s.n, 1, s.h, s.w}, 1.0f);
    return f;
}

template SceneFlowField predict(const Model<float>&, const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                const Tensor<float>&);
template SceneFlowField predict(const Model<double>&, const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                const Tensor<float>&);

SceneFlowField clamp_for_png(const SceneFlowField& field) {
    SceneFlowField out = field;
    auto clamp = [](const Tensor<float>& t, float lo, float hi) {
        auto c = t.clone();
        for (auto& v : c.data()) v = std::isfinite(v) ? std::clamp(v, lo, hi) : 0.0f;
        return c;
    };
    out.disparity = clamp(field.disparity, 0.0f, 255.99f);
    out.change = clamp(field.change, 0.0f, 255.99f);
    out.flow = clamp(field.flow, -511.98f, 511.98f);
    return out;
}

// ---------------------------------------------------------------------------
// Colorization

namespace {

std::array<uint8_t, 3> hsv_to_rgb(double h, double s, double v) {
    h = std::fmod(h, 360.0);
    if (h < 0) h += 360.0;
    const double c = v * s, hp = h / 60.0, x = c * (1 - std::abs(std::fmod(hp, 2.0) - 1));
    double r = 0, g = 0, b = 0;
    if (hp < 1) r = c, g = x;
    else if (hp < 2) r = x, g = c;
    else if (hp < 3) g = c, b = x;
    else if (hp < 4) g = x, b = c;
    else if (hp < 5) r = x, b = c;
    else r = c, b = x;
    const double m = v - c;
    auto q = [](double u) { return static_cast<uint8_t>(std::lround(std::clamp(u, 0.0, 1.0) * 255.0)); };
    return {q(r + m), q(g + m), q(b + m)};
}

}  // namespace

PngImage colorize_flow(const Tensor<float>& flow, double max_magnitude) {
    const Shape& s = flow.shape();
    if (s.c != 2 || s.n != 1) throw ShapeError("colorize_flow: expected (1, 2, H, W), got " + s.str());
    if (max_magnitude <= 0) {
        for (int64_t y = 0; y < s.h; ++y)
            for (int64_t x = 0; x < s.w; ++x)
                max_magnitude = std::max(max_magnitude, std::hypot(double(flow.at(0, 0, y, x)), double(flow.at(0, 1, y, x))));
        if (max_magnitude <= 0) max_magnitude = 1.0;
    }
    PngImage img{static_cast<int>(s.w), static_cast<int>(s.h), 3, 8, {}};
    img.samples.resize(static_cast<size_t>(s.h * s.w * 3));
    for (int64_t y = 0; y < s.h; ++y)
        for (int64_t x = 0; x < s.w; ++x) {
            const double u = flow.at(0, 0, y, x), v = flow.at(0, 1, y, x);
            std::array<uint8_t, 3> rgb{0, 0, 0};
            if (std::isfinite(u) && std::isfinite(v)) {
                // Image y grows downwards; negate v so that hue turns counter-clockwise on screen.
                const double hue = std::atan2(-v, u) * 180.0 / std::numbers::pi;
                rgb = hsv_to_rgb(hue, std::min(1.0, std::hypot(u, v) / max_magnitude), 1.0);
            }
            for (int c = 0; c < 3; ++c) img.samples[static_cast<size_t>((y * s.w + x) * 3 + c)] = rgb[static_cast<size_t>(c)];
        }
    return img;
}

PngImage colorize_scalar(const Tensor<float>& map, double lo, double hi, const Tensor<float>* valid) {
    const Shape& s = map.shape();
    if (s.c != 1 || s.n != 1) throw ShapeError("colorize_scalar: expected (1, 1, H, W), got " + s.str());
    static constexpr double anchors[6][4] = {
        {0.0, 0, 0, 143}, {0.125, 0, 0, 255}, {0.375, 0, 255, 255}, {0.625, 255, 255, 0}, {0.875, 255, 0, 0}, {1.0, 128, 0, 0}};
    PngImage img{static_cast<int>(s.w), static_cast<int>(s.h), 3, 8, {}};
    img.samples.assign(static_cast<size_t>(s.h * s.w * 3), 0);
    const double span = hi - lo;
    for (int64_t y = 0; y < s.h; ++y)
        for (int64_t x = 0; x < s.w; ++x) {
            const double v = map.at(0, 0, y, x);
            if (!std::isfinite(v) || (valid && valid->at(0, 0, y, x) == 0)) continue;
            const double t = span > 0 ? std::clamp((v - lo) / span, 0.0, 1.0) : 0.0;
            int k = 0;
            while (k < 4 && t > anchors[k + 1][0]) ++k;
            const double f = (t - anchors[k][0]) / (anchors[k + 1][0] - anchors[k][0]);
            for (int c = 0; c < 3; ++c) {
                const double value = anchors[k][c + 1] + f * (anchors[k + 1][c + 1] - anchors[k][c + 1]);
                img.samples[static_cast<size_t>((y * s.w + x) * 3 + c)] = static_cast<uint16_t>(std::lround(value));
            }
        }
    return img;
}

// ---------------------------------------------------------------------------
// Runtime

BenchResult bench(const ModelConfig& config, int height, int width, int repetitions, int warmup) {
    if (repetitions < 1) throw std::invalid_argument("bench: repetitions must be positive");
    Model<float> model(config);
    model.init_params(0);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    auto image = [&] {
        auto t = Tensor<float>::zeros({1, 3, height, width});
        for (auto& v : t.data()) v = u(rng);
        return t;
    };
    const auto l1 = image(), r1 = image(), l2 = image(), r2 = image();
    NoGradGuard guard;
    for (int i = 0; i < warmup; ++i) model.forward(l1, r1, l2, r2);
    BenchResult r;
    r.variant = config.variant_name();
    r.parameters = model.parameter_count();
    r.repetitions = repetitions;
    r.min_ms = std::numeric_limits<double>::infinity();
    double total = 0;
    for (int i = 0; i < repetitions; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        model.forward(l1, r1, l2, r2);
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        total += ms;
        r.min_ms = std::min(r.min_ms, ms);
    }
    r.mean_ms = total / repetitions;
    return r;
}

std::vector<BenchResult> bench_variants(int height, int width, int repetitions, int warmup) {
    std::vector<BenchResult> out;
    for (const auto& cfg : ablation_variants()) out.push_back(bench(cfg, height, width, repetitions, warmup));
    return out;
}

std::string bench_table(const std::vector<BenchResult>& rows) {
    std::ostringstream os;
    os << std::left << std::setw(22) << "variant" << std::right << std::setw(12) << "params (M)" << std::setw(12)
       << "mean (ms)" << std::setw(12) << "min (ms)" << "\n";
    for (const auto& r : rows)
        os << std::left << std::setw(22) << r.variant << std::right << std::fixed << std::setprecision(3) << std::setw(12)
           << static_cast<double>(r.parameters) / 1e6 << std::setprecision(1) << std::setw(12) << r.mean_ms
           << std::setw(12) << r.min_ms << "\n";
    return os.str();
}

}  // namespace dwarf
