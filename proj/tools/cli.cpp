// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include "msplat/autodiff.hpp"
#include "msplat/diagnostics.hpp"
#include "msplat/errors.hpp"
#include "msplat/trainer.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>

namespace msplat::cli {
namespace {

/// Invalid flag values; reported with exit status 1 like parse errors.
class UsageError : public Error {
public:
    using Error::Error;
};

template <typename F>
auto as_usage(F&& f) {
    try {
        return f();
    } catch (const ValidationError& e) {
        throw UsageError(e.what());
    }
}

struct RenderFlags {
    int samples = 4;
    std::string pattern = "rotated";
    std::string compositing = "normalized";
    bool deterministic = true;
    int threads = 1;
    CLI::Option* samples_opt = nullptr;

    RenderConfig config() const {
        return as_usage([&] { return make_config(); });
    }
    SampleSpec spec() const {
        return as_usage([&] { return SampleSpec::named(pattern, samples); });
    }
    bool samples_given() const { return samples_opt && samples_opt->count() > 0; }

private:
    RenderConfig make_config() const {
        RenderConfig cfg;
        cfg.compositing = parse_compositing(compositing);
        cfg.deterministic = deterministic;
        cfg.threads = threads;
        cfg.validate();
        return cfg;
    }
};

void add_render_flags(CLI::App* app, RenderFlags& f) {
    f.samples_opt = app->add_option("--samples", f.samples, "Samples per pixel (1, 2, 4 or a perfect square)")
                        ->check(CLI::PositiveNumber);
    app->add_option("--pattern", f.pattern, "Sample pattern for n=4: rotated or grid")
        ->check(CLI::IsMember({"rotated", "grid"}));
    app->add_option("--compositing", f.compositing, "normalized or front_to_back")
        ->check(CLI::IsMember({"normalized", "front_to_back"}));
    app->add_flag("--deterministic,!--no-deterministic", f.deterministic,
                  "Tile-ordered gradient reduction (default on)");
    app->add_option("--threads", f.threads, "Worker threads, 0 = hardware concurrency")->check(CLI::NonNegativeNumber);
}

struct LossFlags {
    double lambda1 = 0.8, lambda2 = 0.2, lambda3 = 0.1;
    double alpha_floor = 0.2;
};

void add_loss_flags(CLI::App* app, LossFlags& f) {
    app->add_option("--lambda1", f.lambda1, "Weight of the (weighted) L1 term");
    app->add_option("--lambda2", f.lambda2, "Weight of the D-SSIM term");
    app->add_option("--lambda3", f.lambda3, "Weight of the gradient-difference term");
    app->add_option("--alpha-floor", f.alpha_floor, "Minimum adaptive pixel weight");
}

struct TrainFlags {
    int iterations = 2000;
    std::string arm = "full";
    std::uint64_t seed = 7;
    bool ramp = false;
    int log_interval = 10;
    LearningRates lr;
};

void add_train_flags(CLI::App* app, TrainFlags& f) {
    app->add_option("--iterations", f.iterations, "Optimizer steps")->check(CLI::NonNegativeNumber);
    app->add_option("--seed", f.seed, "RNG seed");
    app->add_flag("--lambda3-ramp", f.ramp, "Ramp lambda3 linearly over the first half of training");
    app->add_option("--log-interval", f.log_interval, "Iterations between log records")->check(CLI::PositiveNumber);
    app->add_option("--lr-center", f.lr.center, "Center learning rate (times scene extent)");
    app->add_option("--lr-rotation", f.lr.rotation, "Rotation learning rate");
    app->add_option("--lr-scale", f.lr.log_scale, "Log-scale learning rate");
    app->add_option("--lr-color", f.lr.color, "Color learning rate");
    app->add_option("--lr-opacity", f.lr.opacity, "Opacity learning rate");
}

TrainConfig make_train_config(const TrainFlags& t, const LossFlags& l, const RenderFlags& r) {
    return as_usage([&] {
        TrainConfig cfg;
        cfg.iterations = t.iterations;
        cfg.arm = parse_arm(t.arm);
        cfg.seed = t.seed;
        cfg.lambda3_ramp = t.ramp;
        cfg.log_interval = t.log_interval;
        cfg.adam.lr = t.lr;
        cfg.lambdas = {l.lambda1, l.lambda2, l.lambda3};
        cfg.alpha_floor = l.alpha_floor;
        cfg.render = r.config();
        if (r.samples_given()) cfg.samples = r.spec();
        cfg.validate();
        return cfg;
    });
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string() + " for writing");
    f << text;
    if (!f) throw Error("write failed: " + path.string());
}

double mean_abs(const ImageBuffer& a, const ImageBuffer& b) { return mean_l1(a, b); }

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"msplat: multi-sample Gaussian splatting with edge-aware losses"};
    app.name("msplat");
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for all subcommands");

    std::function<int()> action;

    // render ------------------------------------------------------------------
    RenderFlags render_flags;
    std::string render_scene, render_camera, render_out;
    int width = 64, height = 64;
    {
        auto* sub = app.add_subcommand("render", "Render a scene to a PPM image");
        sub->add_option("--scene", render_scene, "Scene file (.gsscene)")->required()->check(CLI::ExistingFile);
        sub->add_option("--camera", render_camera, "Camera file; default is the synthetic camera")
            ->check(CLI::ExistingFile);
        sub->add_option("--width", width, "Synthetic camera width")->check(CLI::PositiveNumber);
        sub->add_option("--height", height, "Synthetic camera height")->check(CLI::PositiveNumber);
        sub->add_option("--out", render_out, "Output PPM")->required();
        add_render_flags(sub, render_flags);
        sub->callback([&] {
            action = [&] {
                const Scene scene = load_scene(render_scene);
                const CameraModel cam = render_camera.empty() ? synthetic_camera(height, width) : load_camera(render_camera);
                write_ppm(render(scene, cam, render_flags.config(), render_flags.spec()), render_out);
                out << "wrote " << render_out << " (" << cam.width << "x" << cam.height << ", "
                    << render_flags.samples << " samples)\n";
                return kOk;
            };
        });
    }

    // train -------------------------------------------------------------------
    RenderFlags train_render;
    LossFlags train_loss;
    TrainFlags train_flags;
    std::string train_bench = "checker_edge", train_scene, train_camera, train_target, train_log, train_out,
                train_image, ckpt_dir;
    int train_gaussians = 500, ckpt_every = 0;
    {
        auto* sub = app.add_subcommand("train", "Fit a scene to a target view");
        sub->add_option("--bench", train_bench, "Built-in benchmark id");
        sub->add_option("--scene", train_scene, "Initial scene (with --target)")->check(CLI::ExistingFile);
        sub->add_option("--camera", train_camera, "Camera for --target")->check(CLI::ExistingFile);
        sub->add_option("--target", train_target, "Target PPM")->check(CLI::ExistingFile);
        sub->add_option("--width", width, "Benchmark width")->check(CLI::PositiveNumber);
        sub->add_option("--height", height, "Benchmark height")->check(CLI::PositiveNumber);
        sub->add_option("--gaussians", train_gaussians, "Gaussian count for benchmark init")->check(CLI::PositiveNumber);
        sub->add_option("--arm", train_flags.arm, "baseline, msaa_only, constraints_only or full")
            ->check(CLI::IsMember({"baseline", "msaa_only", "constraints_only", "full"}));
        sub->add_option("--log", train_log, "Training log CSV");
        sub->add_option("--out", train_out, "Best scene output (.gsscene)");
        sub->add_option("--render", train_image, "Render of the best scene (PPM)");
        sub->add_option("--checkpoint-dir", ckpt_dir, "Directory for <arm>_<iter>.gsscene checkpoints");
        sub->add_option("--checkpoint-every", ckpt_every, "Checkpoint interval (0: final only)")
            ->check(CLI::NonNegativeNumber);
        add_train_flags(sub, train_flags);
        add_loss_flags(sub, train_loss);
        add_render_flags(sub, train_render);
        sub->callback([&] {
            action = [&] {
                TrainConfig cfg = make_train_config(train_flags, train_loss, train_render);
                cfg.checkpoint_dir = ckpt_dir;
                cfg.checkpoint_interval = ckpt_every;
                std::vector<View> views;
                Scene initial;
                if (!train_target.empty()) {
                    if (train_scene.empty()) throw UsageError("--target requires --scene");
                    ImageBuffer target = read_ppm(train_target);
                    CameraModel cam = train_camera.empty() ? synthetic_camera(target.height(), target.width())
                                                           : load_camera(train_camera);
                    views.push_back({cam, std::move(target)});
                    initial = load_scene(train_scene);
                } else {
                    Benchmark b = make_benchmark(train_bench, height, width, cfg.seed, train_gaussians);
                    views = std::move(b.views);
                    initial = train_scene.empty() ? std::move(b.initial) : load_scene(train_scene);
                }
                const TrainResult res = train(initial, views, cfg);
                if (!train_log.empty()) write_text(train_log, res.log.to_csv(!cfg.render.deterministic));
                if (!train_out.empty()) save_scene(res.best_scene, train_out);
                if (!train_image.empty())
                    write_ppm(render(res.best_scene, views[0].camera, cfg.render, cfg.sample_spec()), train_image);
                char buf[160];
                std::snprintf(buf, sizeof(buf), "arm %s: best PSNR %.3f dB at iteration %ld\n",
                              std::string(to_string(cfg.arm)).c_str(), res.best_psnr, res.best_iteration);
                out << buf;
                return kOk;
            };
        });
    }

    // ablate ------------------------------------------------------------------
    RenderFlags abl_render;
    LossFlags abl_loss;
    TrainFlags abl_train;
    AblationSpec abl_spec;
    std::string abl_csv, abl_table;
    {
        auto* sub = app.add_subcommand("ablate", "Train all four arms from a shared initialization");
        sub->add_option("--bench", abl_spec.benchmark, "Benchmark id");
        sub->add_option("--width", abl_spec.width, "Image width")->check(CLI::PositiveNumber);
        sub->add_option("--height", abl_spec.height, "Image height")->check(CLI::PositiveNumber);
        sub->add_option("--gaussians", abl_spec.gaussian_count, "Gaussian count")->check(CLI::PositiveNumber);
        sub->add_option("--csv", abl_csv, "Table as CSV");
        sub->add_option("--table", abl_table, "Table as aligned text");
        add_train_flags(sub, abl_train);
        add_loss_flags(sub, abl_loss);
        add_render_flags(sub, abl_render);
        sub->callback([&] {
            action = [&] {
                if (abl_render.samples_given())
                    throw UsageError("ablate: --samples is fixed per arm and cannot be overridden");
                abl_spec.base = make_train_config(abl_train, abl_loss, abl_render);
                const AblationTable t = run_ablation(abl_spec);
                if (!abl_csv.empty()) write_text(abl_csv, t.to_csv());
                if (!abl_table.empty()) write_text(abl_table, t.to_text());
                out << t.to_text();
                return kOk;
            };
        });
    }

    // gradcheck ---------------------------------------------------------------
    RenderFlags gc_render;
    LossFlags gc_loss;
    std::uint64_t gc_seed = 7;
    double gc_tol = 1e-4;
    bool gc_plain = false;
    {
        auto* sub = app.add_subcommand("gradcheck", "Compare analytic and central-difference gradients");
        sub->add_option("--seed", gc_seed, "Fixture seed");
        sub->add_option("--tolerance", gc_tol, "Maximum relative error")->check(CLI::PositiveNumber);
        sub->add_flag("--plain", gc_plain, "Disable adaptive weights and the gradient-difference term");
        add_loss_flags(sub, gc_loss);
        add_render_flags(sub, gc_render);
        sub->callback([&] {
            action = [&] {
                const GradCheckFixture fx = default_gradcheck_fixture(gc_seed);
                LossOptions lo;
                lo.weights = {gc_loss.lambda1, gc_loss.lambda2, gc_loss.lambda3};
                lo.alpha_floor = gc_loss.alpha_floor;
                lo.adaptive_weights = lo.gradient_difference = !gc_plain;
                GradCheckOptions opts;
                opts.tolerance = gc_tol;
                const GradCheckReport rep =
                    grad_check(fx.scene, fx.camera, fx.target, gc_render.config(), gc_render.spec(), lo, opts);
                out << rep.to_table();
                return rep.pass ? kOk : kGradcheckFailed;
            };
        });
    }

    // metrics -----------------------------------------------------------------
    std::vector<std::string> metric_images;
    {
        auto* sub = app.add_subcommand("metrics", "PSNR / SSIM / L1 of images against a reference");
        sub->add_option("images", metric_images, "REFERENCE IMAGE [IMAGE...]")
            ->required()
            ->expected(2, -1)
            ->check(CLI::ExistingFile);
        sub->callback([&] {
            action = [&] {
                const ImageBuffer ref = read_ppm(metric_images[0]);
                char buf[512];
                std::snprintf(buf, sizeof(buf), "%-40s %10s %10s %12s\n", "image", "PSNR(dB)", "SSIM", "L1");
                out << buf;
                for (std::size_t k = 1; k < metric_images.size(); ++k) {
                    const ImageBuffer img = read_ppm(metric_images[k]);
                    std::snprintf(buf, sizeof(buf), "%-40s %10.4f %10.6f %12.8f\n", metric_images[k].c_str(),
                                  psnr(img, ref), ssim_index(img, ref), mean_abs(img, ref));
                    out << buf;
                }
                return kOk;
            };
        });
    }

    // diff --------------------------------------------------------------------
    std::string diff_pred, diff_gt, diff_out;
    {
        auto* sub = app.add_subcommand("diff", "Inverse-coded difference map (white = agreement)");
        sub->add_option("pred", diff_pred, "Predicted image")->required()->check(CLI::ExistingFile);
        sub->add_option("gt", diff_gt, "Reference image")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", diff_out, "Output PPM")->required();
        sub->callback([&] {
            action = [&] {
                const Grid m = diff_map(read_ppm(diff_pred), read_ppm(diff_gt));
                write_ppm(grid_to_image(m), diff_out);
                double sum = 0.0;
                for (double v : m.values) sum += v;
                char buf[128];
                std::snprintf(buf, sizeof(buf), "mean agreement %.6f\n", sum / static_cast<double>(m.values.size()));
                out << buf;
                return kOk;
            };
        });
    }

    // wavelet -----------------------------------------------------------------
    std::string wav_in, wav_dir, wav_prefix;
    {
        auto* sub = app.add_subcommand("wavelet", "Single-level Haar subbands (LL, LH, HL, HH)");
        sub->add_option("image", wav_in, "Input PPM")->required()->check(CLI::ExistingFile);
        sub->add_option("--out-dir", wav_dir, "Output directory")->required();
        sub->add_option("--prefix", wav_prefix, "File name prefix");
        sub->callback([&] {
            action = [&] {
                const WaveletDecomposition dec = haar_dwt(read_ppm(wav_in));
                write_wavelet_outputs(dec, wav_dir, wav_prefix);
                out << "wrote subbands to " << wav_dir << (dec.padded ? " (input edge-padded)" : "") << "\n";
                return kOk;
            };
        });
    }

    // make-bench --------------------------------------------------------------
    std::string bench_dir;
    std::uint64_t bench_seed = 7;
    int bench_gaussians = 500;
    {
        auto* sub = app.add_subcommand("make-bench", "Write synthetic benchmark fixtures");
        sub->add_option("--out", bench_dir, "Output directory")->required();
        sub->add_option("--width", width, "Image width")->check(CLI::PositiveNumber);
        sub->add_option("--height", height, "Image height")->check(CLI::PositiveNumber);
        sub->add_option("--seed", bench_seed, "RNG seed");
        sub->add_option("--gaussians", bench_gaussians, "Gaussians in the initial scenes")->check(CLI::PositiveNumber);
        sub->callback([&] {
            action = [&] {
                const std::filesystem::path dir = bench_dir;
                std::filesystem::create_directories(dir);
                const CameraModel cam = synthetic_camera(height, width);
                save_camera(cam, dir / "camera.gscam");
                for (const std::string& id : benchmark_ids()) {
                    const Benchmark b = make_benchmark(id, height, width, bench_seed, bench_gaussians);
                    write_ppm(b.views[0].target, dir / (id + "_target.ppm"));
                    save_scene(b.initial, dir / (id + "_init.gsscene"));
                }
                const SyntheticTarget blobs =
                    make_synthetic_target(TargetKind::gaussian_blobs, height, width, bench_seed);
                save_scene(*blobs.scene, dir / "gaussian_blobs_truth.gsscene");
                for (TargetKind k : {TargetKind::edge_halfplane, TargetKind::checkerboard}) {
                    const std::string name = "sharp_" + std::string(to_string(k));
                    const Scene s = make_sharp_scene(k, cam);
                    save_scene(s, dir / (name + ".gsscene"));
                    write_ppm(render(s, cam, RenderConfig{}, SampleSpec::regular_grid(8)),
                              dir / (name + "_reference.ppm"));
                }
                out << "wrote benchmark fixtures to " << dir.string() << "\n";
                return kOk;
            };
        });
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << sub->help();
        return kUsage;
    }
    if (!action) {
        err << app.help();
        return kUsage;
    }
    try {
        return action();
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntime;
    }
}

}  // namespace msplat::cli
