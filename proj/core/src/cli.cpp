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

#include "dwarf/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "dwarf/eval.hpp"
#include "dwarf/gradcheck.hpp"
#include "dwarf/io.hpp"
#include "dwarf/training.hpp"

namespace dwarf {

namespace fs = std::filesystem;

namespace {

struct Options {
    std::string manifest, checkpoint, schedule, out_dir, predictions, variant = "full", format = "kitti";
    uint64_t seed = 0;
    int precision = 32;
    // train
    int64_t steps = -1;
    // infer
    std::vector<std::string> images;
    bool render = false;
    // distill
    double sigma = 0.5, outlier_rate = 0.05;
    // gen
    int count = 10, width = 128, height = 64, objects = 3;
    // bench
    int bench_width = 512, bench_height = 256, repetitions = 3, warmup = 1;
    bool all_variants = false;
};

ModelConfig model_config(const std::string& variant) {
    if (fs::is_regular_file(variant)) return ModelConfig::load(variant);
    return ModelConfig::from_variant(variant);
}

template <typename F>
void with_precision(int precision, F&& f) {
    if (precision == 32) f(float{});
    else if (precision == 64) f(double{});
    else throw std::invalid_argument("--precision must be 32 or 64");
}

template <typename T>
Model<T> load_model(const Options& o, bool require_checkpoint) {
    Model<T> model(model_config(o.variant));
    model.init_params(o.seed);
    if (!o.checkpoint.empty()) {
        try {
            load_checkpoint(o.checkpoint, model.params());
        } catch (const std::exception& e) {
            throw std::runtime_error("checkpoint " + o.checkpoint + " does not fit variant '" +
                                     model.config().variant_name() + "': " + e.what());
        }
    } else if (require_checkpoint) {
        throw std::invalid_argument("--checkpoint is required");
    }
    return model;
}

std::vector<SceneSample> load_samples(const Manifest& m) {
    std::vector<SceneSample> out;
    out.reserve(m.entries.size());
    for (const auto& e : m.entries) out.push_back(load_sample(e));
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    write_file_bytes(path, std::vector<uint8_t>(text.begin(), text.end()));
}

std::array<fs::path, 3> write_truth(const fs::path& dir, const std::string& stem, const SceneFlowField& f,
                                    GtFormat format) {
    const std::string ext = format == GtFormat::Kitti ? ".png" : ".pfm";
    const SceneFlowField g = format == GtFormat::Kitti ? clamp_for_png(f) : f;
    std::array<fs::path, 3> p{dir / (stem + "_d1" + ext), dir / (stem + "_f1" + ext), dir / (stem + "_d2" + ext)};
    write_disparity(p[0], g.disparity, g.mask);
    write_flow(p[1], g.flow, g.mask);
    write_disparity(p[2], g.change, g.mask);
    return p;
}

fs::path require_out_dir(const Options& o) {
    if (o.out_dir.empty()) throw std::invalid_argument("--out-dir is required");
    fs::create_directories(o.out_dir);
    return o.out_dir;
}

int cmd_train(const Options& o, std::ostream& out) {
    if (o.manifest.empty() || o.schedule.empty()) throw std::invalid_argument("train needs --manifest and --schedule");
    const auto dir = require_out_dir(o);
    TrainSchedule schedule = fs::is_regular_file(o.schedule) ? TrainSchedule::load(o.schedule) : make_schedule(o.schedule);
    if (o.steps >= 0) {
        schedule.total_steps = o.steps;
        auto& d = schedule.decay_steps;
        auto& f = schedule.decay_factors;
        while (!d.empty() && d.back() >= o.steps) {
            d.pop_back();
            f.pop_back();
        }
        schedule.split_step = std::min(schedule.split_step, o.steps);
    }
    const auto samples = load_samples(load_manifest(o.manifest, true));
    with_precision(o.precision, [&](auto tag) {
        using T = decltype(tag);
        auto model = load_model<T>(o, false);
        TrainOptions opts;
        opts.log_path = dir / "train_log.csv";
        const auto log = train(model, samples, schedule, o.seed, opts);
        save_checkpoint(dir / "checkpoint.bin", model.params());
        write_text(dir / "model.cfg", model.config().to_text());
        write_text(dir / "schedule.txt", schedule.to_text());
        out << "trained " << log.size() << " steps";
        if (!log.empty()) out << ", final loss " << log.back().loss;
        out << "; wrote " << (dir / "checkpoint.bin").string() << "\n";
    });
    return 0;
}

int cmd_eval(const Options& o, std::ostream& out) {
    if (o.manifest.empty()) throw std::invalid_argument("eval needs --manifest");
    const auto manifest = load_manifest(o.manifest, true);
    MetricReport report;
    if (!o.predictions.empty()) {
        // Saved predictions, matched to the ground truth by line order.
        const auto pred = load_manifest(o.predictions, true);
        if (pred.entries.size() != manifest.entries.size())
            throw std::invalid_argument("--predictions lists " + std::to_string(pred.entries.size()) + " samples, " +
                                        o.manifest + " lists " + std::to_string(manifest.entries.size()));
        for (size_t i = 0; i < manifest.entries.size(); ++i) {
            auto p = load_sample(pred.entries[i]).gt;
            p.mask = Tensor<float>::full(p.mask.shape(), 1.0f);
            report.add(p, load_sample(manifest.entries[i]).gt);
        }
    } else {
        with_precision(o.precision, [&](auto tag) {
            using T = decltype(tag);
            const auto model = load_model<T>(o, true);
            for (const auto& e : manifest.entries) {
                const auto s = load_sample(e);
                report.add(predict(model, s.l1, s.r1, s.l2, s.r2), s.gt);
            }
        });
    }
    out << report.to_table() << report.to_key_values();
    if (!o.out_dir.empty()) write_text(require_out_dir(o) / "metrics.txt", report.to_key_values());
    return 0;
}

int cmd_infer(const Options& o, std::ostream& out) {
    if (o.images.size() != 4) throw std::invalid_argument("infer needs four images: L1 R1 L2 R2");
    const auto dir = require_out_dir(o);
    const GtFormat format = parse_gt_format(o.format);
    std::array<Tensor<float>, 4> im;
    for (size_t i = 0; i < 4; ++i) im[i] = read_image(o.images[i]);
    SceneFlowField pred;
    with_precision(o.precision, [&](auto tag) {
        using T = decltype(tag);
        pred = predict(load_model<T>(o, true), im[0], im[1], im[2], im[3]);
    });
    const auto paths = write_truth(dir, "pred", pred, format);
    for (const auto& p : paths) out << p.string() << "\n";
    if (o.render) {
        const float dmax = std::max(1.0f, *std::max_element(pred.disparity.data().begin(), pred.disparity.data().end()));
        write_file_bytes(dir / "pred_d1_color.png", encode_png(colorize_scalar(pred.disparity, 0.0, dmax)));
        write_file_bytes(dir / "pred_d2_color.png", encode_png(colorize_scalar(pred.change, 0.0, dmax)));
        write_file_bytes(dir / "pred_f1_color.png", encode_png(colorize_flow(pred.flow)));
        out << (dir / "pred_d1_color.png").string() << "\n"
            << (dir / "pred_d2_color.png").string() << "\n"
            << (dir / "pred_f1_color.png").string() << "\n";
    }
    return 0;
}

int cmd_distill(const Options& o, std::ostream& out) {
    if (o.manifest.empty()) throw std::invalid_argument("distill needs --manifest");
    const auto dir = require_out_dir(o);
    const GtFormat format = parse_gt_format(o.format);
    const bool teacher = !o.checkpoint.empty();
    const auto manifest = load_manifest(o.manifest, !teacher);
    std::vector<ManifestEntry> entries;
    auto label = [&](auto& model_or_null) {
        for (size_t i = 0; i < manifest.entries.size(); ++i) {
            const auto& e = manifest.entries[i];
            const auto s = load_sample(e);
            SceneFlowField proxy;
            if constexpr (std::is_same_v<std::decay_t<decltype(model_or_null)>, std::nullptr_t>) {
                NoiseSpec noise;
                noise.sigma_flow = noise.sigma_disparity = noise.sigma_change = o.sigma;
                noise.outlier_rate = o.outlier_rate;
                noise.seed = o.seed * 1'000'003 + i;
                proxy = make_proxy(s.gt, noise);
            } else {
                proxy = predict(model_or_null, s.l1, s.r1, s.l2, s.r2);
            }
            std::ostringstream stem;
            stem << "proxy_" << std::setw(5) << std::setfill('0') << i;
            ManifestEntry p;
            p.images = e.images;
            p.truth = write_truth(dir, stem.str(), proxy, format);
            p.provenance = Provenance::Px;
            entries.push_back(p);
        }
    };
    if (teacher) {
        with_precision(o.precision, [&](auto tag) {
            using T = decltype(tag);
            auto model = load_model<T>(o, true);
            label(model);
        });
    } else {
        std::nullptr_t none = nullptr;
        label(none);
    }
    write_manifest(dir / "manifest.txt", entries);
    out << "wrote " << entries.size() << " proxy samples to " << (dir / "manifest.txt").string() << "\n";
    return 0;
}

int cmd_gradcheck(std::ostream& out, std::ostream& err) {
    const auto results = run_gradient_suite();
    double worst = 0;
    std::string worst_op;
    for (const auto& r : results) {
        out << std::left << std::setw(40) << r.op << std::right << std::scientific << std::setprecision(3)
            << r.result.max_relative_error << std::defaultfloat << "  (" << r.result.coordinates << " coordinates)\n";
        if (r.result.max_relative_error > worst) {
            worst = r.result.max_relative_error;
            worst_op = r.op;
        }
    }
    if (worst >= 1e-5) {
        err << "error: gradient check failed for " << worst_op << " (max relative error " << worst << ")\n";
        return 1;
    }
    out << "all " << results.size() << " checks below 1e-5\n";
    return 0;
}

int cmd_bench(const Options& o, std::ostream& out) {
    std::vector<BenchResult> rows;
    if (o.all_variants) rows = bench_variants(o.bench_height, o.bench_width, o.repetitions, o.warmup);
    else rows.push_back(bench(model_config(o.variant), o.bench_height, o.bench_width, o.repetitions, o.warmup));
    out << o.bench_width << "x" << o.bench_height << ", " << o.repetitions << " repetitions after " << o.warmup << " warmup\n"
        << bench_table(rows);
    return 0;
}

int cmd_gen(const Options& o, std::ostream& out) {
    const auto dir = require_out_dir(o);
    const GtFormat format = parse_gt_format(o.format);
    if (o.count < 0 || o.width < 1 || o.height < 1 || o.objects < 0)
        throw std::invalid_argument("gen: count, width, height and objects must be positive");
    std::vector<ManifestEntry> entries;
    for (int i = 0; i < o.count; ++i) {
        const uint64_t seed = o.seed * 1'000'003 + static_cast<uint64_t>(i);
        const auto s = generate_scene(random_scene_spec(o.width, o.height, o.objects, seed), seed);
        std::ostringstream stem;
        stem << "scene_" << std::setw(5) << std::setfill('0') << i;
        entries.push_back(write_sample(dir, stem.str(), s, format));
    }
    write_manifest(dir / "manifest.txt", entries);
    out << "wrote " << entries.size() << " scenes to " << (dir / "manifest.txt").string() << "\n";
    return 0;
}

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"DWARF scene flow: training, evaluation and tooling"};
    app.require_subcommand(1);
    Options o;

    auto model_flags = [&](CLI::App* c) {
        c->add_option("--checkpoint", o.checkpoint, "Checkpoint file");
        c->add_option("--variant", o.variant, "baseline, full, a list of dense,3dcorr,refine or a config file")
            ->capture_default_str();
        c->add_option("--precision", o.precision, "32 or 64")->capture_default_str();
        c->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    };

    auto* train_cmd = app.add_subcommand("train", "Train a model from a manifest and a schedule");
    model_flags(train_cmd);
    train_cmd->add_option("--manifest", o.manifest, "Training manifest")->required();
    train_cmd->add_option("--schedule", o.schedule, "Schedule file or preset (flyingthings, kitti_ft, distilled_ft)")
        ->required();
    train_cmd->add_option("--out-dir", o.out_dir, "Output directory")->required();
    train_cmd->add_option("--steps", o.steps, "Override the step count");

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest");
    model_flags(eval_cmd);
    eval_cmd->add_option("--manifest", o.manifest, "Evaluation manifest")->required();
    eval_cmd->add_option("--out-dir", o.out_dir, "Also write metrics.txt here");
    eval_cmd->add_option("--predictions", o.predictions, "Manifest of saved predictions instead of a checkpoint");

    auto* infer_cmd = app.add_subcommand("infer", "Predict disparity, flow and disparity change for four images");
    model_flags(infer_cmd);
    infer_cmd->add_option("images", o.images, "L1 R1 L2 R2")->expected(4)->required();
    infer_cmd->add_option("--out-dir", o.out_dir, "Output directory")->required();
    infer_cmd->add_option("--format", o.format, "kitti or pfm")->capture_default_str();
    infer_cmd->add_flag("--render", o.render, "Also write colorized renders");

    auto* distill_cmd = app.add_subcommand("distill", "Write proxy labels for a manifest");
    model_flags(distill_cmd);
    distill_cmd->add_option("--manifest", o.manifest, "Source manifest")->required();
    distill_cmd->add_option("--out-dir", o.out_dir, "Output directory")->required();
    distill_cmd->add_option("--format", o.format, "kitti or pfm")->capture_default_str();
    distill_cmd->add_option("--sigma", o.sigma, "Gaussian label noise (px), without a teacher")->capture_default_str();
    distill_cmd->add_option("--outlier-rate", o.outlier_rate, "Fraction of pixels in outlier patches, without a teacher")
        ->capture_default_str();

    auto* grad_cmd = app.add_subcommand("gradcheck", "Run the finite-difference gradient suite");

    auto* bench_cmd = app.add_subcommand("bench", "Time the forward pass");
    bench_cmd->add_option("--variant", o.variant, "Variant to time")->capture_default_str();
    bench_cmd->add_flag("--all", o.all_variants, "Time the four ablation variants");
    bench_cmd->add_option("--width", o.bench_width, "Input width")->capture_default_str();
    bench_cmd->add_option("--height", o.bench_height, "Input height")->capture_default_str();
    bench_cmd->add_option("--repetitions", o.repetitions, "Timed runs")->capture_default_str();
    bench_cmd->add_option("--warmup", o.warmup, "Untimed runs")->capture_default_str();

    auto* gen_cmd = app.add_subcommand("gen", "Generate synthetic scenes with ground truth");
    gen_cmd->add_option("--out-dir", o.out_dir, "Output directory")->required();
    gen_cmd->add_option("--count", o.count, "Number of scenes")->capture_default_str();
    gen_cmd->add_option("--width", o.width, "Width")->capture_default_str();
    gen_cmd->add_option("--height", o.height, "Height")->capture_default_str();
    gen_cmd->add_option("--objects", o.objects, "Objects per scene")->capture_default_str();
    gen_cmd->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    gen_cmd->add_option("--format", o.format, "kitti or pfm")->capture_default_str();

    if (argc > 1 && argv[1][0] != '-' && !app.get_subcommand_no_throw(argv[1])) {
        err << "error: unknown subcommand '" << argv[1] << "' (train, eval, infer, distill, gradcheck, bench, gen)\n";
        return 2;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << one_line(e.what()) << "\n";
        return 2;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(o, out);
        if (eval_cmd->parsed()) return cmd_eval(o, out);
        if (infer_cmd->parsed()) return cmd_infer(o, out);
        if (distill_cmd->parsed()) return cmd_distill(o, out);
        if (grad_cmd->parsed()) return cmd_gradcheck(out, err);
        if (bench_cmd->parsed()) return cmd_bench(o, out);
        if (gen_cmd->parsed()) return cmd_gen(o, out);
    } catch (const std::exception& e) {
        err << "error: " << one_line(e.what()) << "\n";
        return 1;
    }
    return 1;
}

}  // namespace dwarf
