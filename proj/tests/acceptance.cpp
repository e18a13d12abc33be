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

// Acceptance runner. `dwarf_acceptance [N ...] [--out DIR]` checks the listed
// criteria (all ten when none are given) and prints one PASS/FAIL line each.

#include <algorithm>
#include <chrono>
#include <cstring>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dwarf/adam.hpp"
#include "dwarf/correlation.hpp"
#include "dwarf/eval.hpp"
#include "dwarf/gradcheck.hpp"
#include "dwarf/io.hpp"
#include "dwarf/network.hpp"
#include "dwarf/training.hpp"
#include "oracles.hpp"
#include "scene_checks.hpp"

using namespace dwarf;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

// Collects named boolean checks; the first failure is reported.
struct Checks {
    int total = 0;
    std::vector<std::string> failed;

    void operator()(bool ok, const std::string& what) {
        ++total;
        if (!ok) failed.push_back(what);
    }
    Outcome outcome(const std::string& summary) const {
        if (failed.empty()) return {true, summary + " (" + std::to_string(total) + " checks)"};
        return {false, std::to_string(failed.size()) + "/" + std::to_string(total) + " checks failed, first: " + failed[0]};
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

fs::path g_out_dir = ".";

// ---------------------------------------------------------------------------

Outcome gradient_suite() {
    const auto t0 = Clock::now();
    const auto results = run_gradient_suite();
    const double secs = seconds_since(t0);
    double worst = 0;
    std::string worst_op;
    for (const auto& r : results) {
        std::printf("  %-36s max rel err %.3g over %lld coords\n", r.op.c_str(), r.result.max_relative_error,
                    static_cast<long long>(r.result.coordinates));
        if (r.result.max_relative_error >= worst) {
            worst = r.result.max_relative_error;
            worst_op = r.op;
        }
    }
    const bool ok = worst < 1e-5 && secs < 300 && !results.empty();
    return {ok, std::to_string(results.size()) + " ops, worst " + fmt("%.3g", worst) + " (" + worst_op + "), " +
                    fmt("%.1f s", secs)};
}

Outcome correlation_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(11);
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    constexpr int kInstances = 200;
    double worst[3] = {0, 0, 0};
    for (int mode = 0; mode < 3; ++mode)
        for (int i = 0; i < kInstances; ++i) {
            CorrConfig cfg;
            cfg.rx = pick(0, 4);
            cfg.ry = pick(0, 4);
            cfg.rz = pick(0, 4);
            cfg.normalize = pick(0, 1) == 1;
            const int h = pick(1, 16), w = pick(1, 16), c = pick(1, 8);
            const uint64_t seed = rng();
            const auto a = oracle::random_tensor<double>({1, c, h, w}, seed);
            const auto b = oracle::random_tensor<double>({1, c, h, w}, seed + 1);
            Tensor<double> fast, ref;
            if (mode == 0) {
                fast = corr1d(a, b, cfg).scores;
                ref = corr_reference(CorrMode::OneD, a, b, cfg).scores;
            } else if (mode == 1) {
                fast = corr2d(a, b, cfg).scores;
                ref = corr_reference(CorrMode::TwoD, a, b, cfg).scores;
            } else {
                const auto c1 = corr1d(a, b, cfg), c2 = corr1d(b, a, cfg);
                fast = corr3d(c1, c2, cfg).scores;
                ref = corr_reference(CorrMode::ThreeD, c1.scores, c2.scores, cfg).scores;
            }
            if (fast.shape() != ref.shape()) return {false, "shape mismatch in mode " + std::to_string(mode)};
            const auto fv = std::as_const(fast).data(), rv = std::as_const(ref).data();
            for (size_t k = 0; k < fv.size(); ++k) worst[mode] = std::max(worst[mode], std::abs(fv[k] - rv[k]));
        }
    const double secs = seconds_since(t0);
    const bool ok = std::max({worst[0], worst[1], worst[2]}) <= 1e-6 && secs < 60;
    return {ok, std::to_string(kInstances) + " instances per mode, max abs diff 1d " + fmt("%.2g", worst[0]) + ", 2d " +
                    fmt("%.2g", worst[1]) + ", 3d " + fmt("%.2g", worst[2]) + ", " + fmt("%.1f s", secs)};
}

Outcome configuration_fidelity() {
    Checks check;
    CorrConfig cfg;
    const auto z = Tensor<float>::zeros({1, 4, 5, 5});
    const auto c1 = corr1d(z, z, cfg);
    check(c1.channels() == 9, "1D volume has 9 channels");
    check(corr2d(z, z, cfg).channels() == 81, "2D volume has 81 channels");
    check(corr3d(c1, c1, cfg).channels() == 81, "3D volume has 81 channels");

    check(kEncoderChannels == std::array<int64_t, 6>{16, 32, 64, 96, 128, 196}, "encoder channels");
    check(kEncoderStrides == std::array<int, 3>{2, 1, 1}, "encoder strides");
    Model<float> full(ModelConfig::from_variant("full"));
    check(full.conv_layer_count("enc.") == 18, "18 encoder convolutions");
    for (int level = 1; level <= 6; ++level)
        check(full.params().get("enc.l" + std::to_string(level) + ".c2.w").shape().n ==
                  kEncoderChannels[static_cast<size_t>(level - 1)],
              "encoder level " + std::to_string(level) + " width");
    check(kRefineDilations == std::array<int, 6>{1, 2, 4, 8, 16, 1}, "refinement dilations");
    check(kRefineChannels == std::array<int64_t, 6>{128, 128, 128, 96, 64, 32}, "refinement channels");
    check(kHeadChannels == std::array<int64_t, 2>{64, 32}, "head channels");
    check(kLeakySlope == 0.1, "leaky slope");

    const auto pre = LossWeights::pretraining();
    check(pre.alpha[6] == 0.32 && pre.alpha[5] == 0.08 && pre.alpha[4] == 0.02 && pre.alpha[3] == 0.01 &&
              pre.alpha[2] == 0.005,
          "pretraining alpha");
    check(pre.gamma == 0.0004, "pretraining gamma");
    check(pre.epsilon == std::array<double, 3>{1, 1, 0.5}, "pretraining epsilon");
    const auto ft = LossWeights::fine_tuning();
    check(ft.alpha[2] == 0.001 && ft.alpha[3] == 0 && ft.alpha[4] == 0 && ft.alpha[5] == 0 && ft.alpha[6] == 0,
          "fine-tuning alpha");
    check(ft.gamma == 0.0004, "fine-tuning gamma");
    check(ft.epsilon == std::array<double, 3>{1, 1, 0.5}, "fine-tuning epsilon");
    check(ft.full_resolution, "fine-tuning loss at full resolution");

    const auto ft3d = make_schedule("flyingthings");
    check(ft3d.total_steps == 1200000 && ft3d.batch_size == 4, "flyingthings steps and batch");
    check(ft3d.crop_width == 768 && ft3d.crop_height == 384, "flyingthings crop");
    check(ft3d.learning_rate == 1e-4, "flyingthings lr");
    check(ft3d.decay_steps == std::vector<int64_t>{400000, 600000, 800000, 1000000}, "flyingthings decays");
    check(ft3d.lr_at(1000000) == 1e-4 / 16, "flyingthings halvings");
    const auto kitti = make_schedule("kitti_ft");
    check(kitti.total_steps == 50000 && kitti.batch_size == 4, "kitti steps and batch");
    check(kitti.pad && (*kitti.pad)[0] == 1280 && (*kitti.pad)[1] == 384, "kitti pad");
    check(kitti.crop_width == 896 && kitti.crop_height == 320, "kitti crop");
    check(kitti.learning_rate == 3e-5, "kitti lr");
    check(kitti.decay_steps == std::vector<int64_t>{25000, 35000, 45000}, "kitti decays");
    check(kitti.lr_at(45000) == 3e-5 / 8, "kitti halvings");
    check(kitti.loss == LossPreset::FineTuning, "kitti loss preset");
    AugmentSpec aug;
    check(aug.gamma_min == 0.8 && aug.gamma_max == 1.2 && aug.brightness_min == 0.5 && aug.brightness_max == 2.0 &&
              aug.color_min == 0.8 && aug.color_max == 1.2,
          "augmentation ranges");
    AdamOptions adam;
    check(adam.beta1 == 0.9 && adam.beta2 == 0.999, "adam betas");
    return check.outcome("volumes 9/81/81, encoder, refinement, loss and schedule presets");
}

Outcome supplementary_arithmetic() {
    const auto a = feature_count(40, 40, 2, std::nullopt), b = feature_count(40, 40, 2, 0),
               c = feature_count(40, 40, 2, 2);
    return {a == 562 && b == 962 && c == 2562,
            "feature_count = " + std::to_string(a) + ", " + std::to_string(b) + ", " + std::to_string(c)};
}

Outcome parameter_trend() {
    std::vector<int64_t> counts;
    std::string detail;
    for (const auto& cfg : ablation_variants()) {
        counts.push_back(Model<float>(cfg).parameter_count());
        detail += (detail.empty() ? "" : ", ") + cfg.variant_name() + " " + fmt("%.2fM", counts.back() / 1e6);
    }
    bool ok = std::is_sorted(counts.begin(), counts.end()) &&
              std::adjacent_find(counts.begin(), counts.end()) == counts.end();
    ok = ok && std::abs(counts.front() / 5.06e6 - 1.0) < 0.10 && std::abs(counts.back() / 19.62e6 - 1.0) < 0.10;
    return {ok, detail};
}

Outcome warp_consistency() {
    const auto t0 = Clock::now();
    double worst = 0, sum = 0;
    int views = 0;
    for (uint64_t i = 0; i < 50; ++i) {
        const auto s = generate_scene(random_scene_spec(128, 64, 3, 300 + i), 300 + i);
        const auto r = checks::reconstruction_error(s);
        if (r.pixels == 0) return {false, "scene " + std::to_string(i) + " has no valid pixels"};
        for (double e : {r.r1, r.l2, r.r2}) {
            worst = std::max(worst, e);
            sum += e;
            ++views;
        }
    }
    const double secs = seconds_since(t0);
    return {worst < 0.02 && secs < 120,
            "50 scenes, mean " + fmt("%.4f", sum / views) + ", worst " + fmt("%.4f", worst) + ", " + fmt("%.1f s", secs)};
}

struct Epe {
    double d1 = 0, d2 = 0, f1 = 0;
    double worst() const { return std::max({d1, d2, f1}); }
};

Epe full_res_epe(const Model<float>& model, const SceneSample& s) {
    const auto p = predict(model, s.l1, s.r1, s.l2, s.r2);
    return {*epe(p.disparity, s.gt.disparity, s.gt.mask), *epe(p.change, s.gt.change, s.gt.mask),
            *epe(p.flow, s.gt.flow, s.gt.mask)};
}

Outcome overfit() {
    const auto t0 = Clock::now();
    const auto scene = generate_scene(random_scene_spec(128, 64, 3, 1), 1);
    Model<float> model(ModelConfig::from_variant("full"));
    model.init_params(1);
    TrainSchedule schedule;
    schedule.name = "overfit";
    schedule.total_steps = 2000;
    schedule.learning_rate = 1e-4;
    schedule.augment_enabled = false;

    Epe last;
    int64_t reached = -1;
    TrainOptions options;
    options.stop_after = [&](const StepLog& log) {
        if ((log.step + 1) % 50 != 0) return false;
        last = full_res_epe(model, scene);
        std::printf("  step %4lld loss %.4f  epe d1 %.3f d2 %.3f f1 %.3f  %.0f s\n", static_cast<long long>(log.step + 1),
                    log.loss, last.d1, last.d2, last.f1, seconds_since(t0));
        std::fflush(stdout);
        if (last.worst() < 0.5) reached = log.step + 1;
        return reached > 0;
    };
    const auto log = train(model, std::vector<SceneSample>{scene}, schedule, 1, options);
    if (reached < 0) last = full_res_epe(model, scene);
    const double secs = seconds_since(t0);
    const std::string epes =
        "epe d1 " + fmt("%.3f", last.d1) + ", d2 " + fmt("%.3f", last.d2) + ", f1 " + fmt("%.3f", last.f1);
    return {reached > 0 && secs < 1800,
            (reached > 0 ? "below 0.5 px after " + std::to_string(reached) + " steps, "
                         : "not below 0.5 px after " + std::to_string(log.size()) + " steps, ") +
                epes + ", " + fmt("%.0f s", secs)};
}

// Toy benchmark: 10 clean scenes, 200 scenes with simulated teacher labels,
// 20 held-out scenes. Px->Gt and Gt-only runs get the same step budget.
Outcome distillation_trend() {
    const auto t0 = Clock::now();
    constexpr int kSteps = 600, kSplit = 400, kEvalEvery = 100;
    const char* variant = "baseline";
    std::vector<SceneSample> data;
    for (uint64_t i = 0; i < 10; ++i) {
        data.push_back(generate_scene(random_scene_spec(128, 64, 3, 1000 + i), 1000 + i));
        data.back().provenance = Provenance::Gt;
    }
    for (uint64_t i = 0; i < 200; ++i) {
        auto s = generate_scene(random_scene_spec(128, 64, 3, 2000 + i), 2000 + i);
        NoiseSpec noise;
        noise.seed = 2000 + i;
        s.gt = make_proxy(s.gt, noise);
        s.provenance = Provenance::Px;
        data.push_back(std::move(s));
    }
    std::vector<SceneSample> held_out;
    for (uint64_t i = 0; i < 20; ++i) held_out.push_back(generate_scene(random_scene_spec(128, 64, 3, 5000 + i), 5000 + i));

    auto held_out_sf = [&](const Model<float>& model) {
        MetricReport report;
        for (const auto& s : held_out) report.add(predict(model, s.l1, s.r1, s.l2, s.r2), s.gt);
        return *report.sf_all();
    };

    std::ofstream curves(g_out_dir / "distillation_curves.csv");
    curves << "seed,schedule,step,loss,held_out_sf_all\n";
    std::vector<double> final_gt, final_px;
    for (uint64_t seed = 1; seed <= 3; ++seed)
        for (const auto mode : {DistillMode::GtOnly, DistillMode::PxThenGt}) {
            TrainSchedule schedule;
            schedule.name = distill_mode_name(mode);
            schedule.total_steps = kSteps;
            schedule.learning_rate = 1e-4;
            schedule.mode = mode;
            schedule.split_step = mode == DistillMode::PxThenGt ? kSplit : 0;
            schedule.augment.zoom_probability = 0.0;
            Model<float> model(ModelConfig::from_variant(variant));
            model.init_params(seed);
            double sf = 0;
            TrainOptions options;
            options.on_step = [&](const StepLog& log) {
                if ((log.step + 1) % kEvalEvery != 0) return;
                sf = held_out_sf(model);
                curves << seed << ',' << schedule.name << ',' << log.step + 1 << ',' << log.loss << ',' << sf << '\n';
                curves.flush();
                std::printf("  seed %llu %-5s step %4lld loss %.4f held-out SF-All %.2f%%\n",
                            static_cast<unsigned long long>(seed), schedule.name.c_str(),
                            static_cast<long long>(log.step + 1), log.loss, sf);
                std::fflush(stdout);
            };
            train(model, data, schedule, seed, options);
            (mode == DistillMode::GtOnly ? final_gt : final_px).push_back(sf);
        }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    const double gt = median(final_gt), px = median(final_px);
    return {px <= gt, "median held-out SF-All px->gt " + fmt("%.2f%%", px) + " vs gt " + fmt("%.2f%%", gt) + " (" +
                          variant + ", " + std::to_string(kSteps) + " steps, split " + std::to_string(kSplit) +
                          "; curves in distillation_curves.csv), " + fmt("%.0f s", seconds_since(t0))};
}

Tensor<float> ones(int64_t c, int64_t h, int64_t w) { return Tensor<float>::full({1, c, h, w}, 1.0f); }
Tensor<float> scalar(float v) { return Tensor<float>::full({1, 1, 1, 1}, v); }

Outcome metric_correctness() {
    Checks check;
    const auto m = ones(1, 1, 1);
    check(*epe(Tensor<float>::from({1, 2, 1, 1}, {3, 4}), Tensor<float>::zeros({1, 2, 1, 1}), m) == 5.0, "epe 3-4-5");
    check(*epe(scalar(8), scalar(10), m) == 2.0, "epe disparity");
    check(*outlier_rate(scalar(104), scalar(100), m) == 0.0, "100/104 is not an outlier");
    check(*outlier_rate(scalar(14), scalar(10), m) == 100.0, "10/14 is an outlier");
    check(*outlier_rate(Tensor<float>::from({1, 1, 1, 2}, {104, 14}), Tensor<float>::from({1, 1, 1, 2}, {100, 10}),
                        ones(1, 1, 2)) == 50.0,
          "mixed pair is 50%");
    check(!outlier_rate(scalar(1), scalar(1), Tensor<float>::zeros({1, 1, 1, 1})).has_value(), "empty mask");

    const auto mask = ones(1, 10, 10);
    auto d1 = Tensor<float>::zeros({1, 1, 10, 10}), d2 = d1.clone(), f1 = d1.clone();
    d1.at(0, 0, 0, 0) = 1;
    d2.at(0, 0, 5, 5) = 1;
    f1.at(0, 0, 9, 9) = 1;
    check(std::abs(*sf_all(d1, d2, f1, mask) - 3.0) < 1e-12, "disjoint outliers give 3%");
    check(std::abs(*sf_all(d1, d1, d1, mask) - 1.0) < 1e-12, "identical outliers give 1%");

    int evaluated = 0;
    for (uint64_t t = 0; t < 100; ++t) {
        const uint64_t s = 7000 + 10 * t;
        auto make = [&](uint64_t k) {
            SceneFlowField f;
            f.flow = oracle::random_tensor<float>({1, 2, 6, 7}, s + k, -30, 30);
            f.disparity = oracle::random_tensor<float>({1, 1, 6, 7}, s + k + 1, 0, 60);
            f.change = oracle::random_tensor<float>({1, 1, 6, 7}, s + k + 2, 0, 60);
            f.mask = ones(1, 6, 7);
            return f;
        };
        const auto gt = make(0), pred = make(3);
        const auto r = evaluate(pred, gt);
        ++evaluated;
        check(*r.sf_all() + 1e-12 >= std::max({*r.d1_all(), *r.d2_all(), *r.f1_all()}),
              "SF-All >= max task rate, trial " + std::to_string(t));
    }
    return check.outcome("EPE, outlier and SF-All fixtures; SF-All >= max over " + std::to_string(evaluated) +
                         " random evaluations");
}

Outcome bit_exact_io(const fs::path& data_dir) {
    Checks check;
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<float> u(-1e4f, 1e4f);
    for (int trial = 0; trial < 50; ++trial) {
        PfmImage img{1 + trial % 9, 1 + trial % 4, trial % 2 ? 3 : 1, {}};
        img.data.resize(static_cast<size_t>(img.width * img.height * img.channels));
        for (auto& v : img.data) v = u(rng);
        const auto back = decode_pfm(encode_pfm(img));
        check(back.width == img.width && back.height == img.height && back.channels == img.channels &&
                  std::memcmp(back.data.data(), img.data.data(), img.data.size() * sizeof(float)) == 0,
              "pfm round trip " + std::to_string(trial));
    }

    double worst_flow = 0, worst_disp = 0;
    for (uint64_t t = 0; t < 20; ++t) {
        const auto flow = oracle::random_tensor<float>({1, 2, 9, 11}, 100 + t, -500, 500);
        const auto disp = oracle::random_tensor<float>({1, 1, 9, 11}, 200 + t, 0.01, 255);
        const auto m2 = ones(1, 9, 11);
        const auto [f, fm] = decode_flow_png(encode_flow_png(flow, m2));
        const auto [d, dm] = decode_disparity_png(encode_disparity_png(disp, m2));
        for (int64_t i = 0; i < flow.numel(); ++i)
            worst_flow = std::max(worst_flow, static_cast<double>(std::abs(f.data()[static_cast<size_t>(i)] -
                                                                         flow.data()[static_cast<size_t>(i)])));
        for (int64_t i = 0; i < disp.numel(); ++i)
            worst_disp = std::max(worst_disp, static_cast<double>(std::abs(d.data()[static_cast<size_t>(i)] -
                                                                         disp.data()[static_cast<size_t>(i)])));
    }
    check(worst_flow <= 1.0 / 128, "flow png within 1/128");
    check(worst_disp <= 1.0 / 512, "disparity png within 1/512");

    const std::vector<uint8_t> one{0x50, 0x66, 0x0a, 0x31, 0x20, 0x31, 0x0a, 0x2d, 0x31, 0x0a, 0x00, 0x00, 0x60, 0x40};
    check(read_file_bytes(data_dir / "golden_one.pfm") == one, "golden_one.pfm bytes");
    check(encode_pfm(PfmImage{1, 1, 1, {3.5f}}) == one, "encoder reproduces golden_one.pfm");
    const auto be = decode_pfm(read_file_bytes(data_dir / "golden_be.pfm"));
    check(be.width == 3 && be.height == 2 && be.data[0] == 1.0f && be.data[1] == -2.0f && be.data[2] == 0.5f &&
              std::isnan(be.data[3]) && be.data[4] == 3.5f && be.data[5] == 1e-3f,
          "golden_be.pfm values");
    const auto [gf, gfm] = decode_flow_png(read_file_bytes(data_dir / "golden_flow.png"));
    check(gf.at(0, 0, 0, 2) == -2.5f && gf.at(0, 0, 1, 0) == 511.984375f && gf.at(0, 1, 1, 0) == -511.0f &&
              gf.at(0, 1, 1, 1) == 100.0f && gfm.at(0, 0, 1, 2) == 0.0f,
          "golden_flow.png values");
    const auto [gd, gdm] = decode_disparity_png(read_file_bytes(data_dir / "golden_disp.png"));
    check(gd.at(0, 0, 0, 0) == 1.5f && gdm.at(0, 0, 0, 1) == 0.0f && gd.at(0, 0, 1, 0) == 255.99609375f &&
              gd.at(0, 0, 1, 1) == 0.00390625f,
          "golden_disp.png values");
    return check.outcome("pfm bit-exact; png flow err " + fmt("%.5f", worst_flow) + ", disparity err " +
                         fmt("%.5f", worst_disp) + "; golden files");
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> selected;
    fs::path data_dir = DWARF_TEST_DATA_DIR;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--out" && i + 1 < argc) {
            g_out_dir = argv[++i];
        } else {
            try {
                selected.push_back(std::stoi(a));
            } catch (const std::exception&) {
                std::fprintf(stderr, "usage: %s [criterion ...] [--out DIR]\n", argv[0]);
                return 2;
            }
        }
    }
    if (selected.empty())
        for (int n = 1; n <= 10; ++n) selected.push_back(n);
    fs::create_directories(g_out_dir);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"gradient suite", gradient_suite},
        {"correlation oracle equivalence", correlation_oracle},
        {"configuration fidelity", configuration_fidelity},
        {"supplementary arithmetic", supplementary_arithmetic},
        {"parameter-count trend", parameter_trend},
        {"data/warp consistency", warp_consistency},
        {"overfit check", overfit},
        {"distillation trend", distillation_trend},
        {"metric correctness", metric_correctness},
        {"bit-exact I/O", [&] { return bit_exact_io(data_dir); }},
    };
    int failures = 0;
    for (int n : selected) {
        if (n < 1 || n > static_cast<int>(criteria.size())) {
            std::fprintf(stderr, "no criterion %d\n", n);
            return 2;
        }
        const auto& [name, run] = criteria[static_cast<size_t>(n - 1)];
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("criterion %d [%s] %s: %s\n", n, o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
