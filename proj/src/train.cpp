// SPDX-License-Identifier: Apache-2.0
#include "msplat/diagnostics.hpp"
#include "msplat/errors.hpp"
#include "msplat/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

namespace msplat {

std::string_view to_string(Arm arm) {
    switch (arm) {
        case Arm::baseline: return "baseline";
        case Arm::msaa_only: return "msaa_only";
        case Arm::constraints_only: return "constraints_only";
        case Arm::full: return "full";
    }
    return "?";
}

Arm parse_arm(std::string_view s) {
    for (Arm a : kAllArms)
        if (to_string(a) == s) return a;
    throw ValidationError("unknown arm '" + std::string(s) + "'");
}

ArmFeatures features_of(Arm arm) {
    switch (arm) {
        case Arm::baseline: return {1, false};
        case Arm::msaa_only: return {4, false};
        case Arm::constraints_only: return {1, true};
        case Arm::full: return {4, true};
    }
    return {};
}

void TrainConfig::validate() const {
    if (iterations < 0) throw ValidationError("iterations must be >= 0");
    const LearningRates& lr = adam.lr;
    for (double r : {lr.center, lr.rotation, lr.log_scale, lr.color, lr.opacity})
        if (!(r > 0.0) || !std::isfinite(r)) throw ValidationError("learning rates must be positive and finite");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
        throw ValidationError("Adam betas must lie in [0, 1)");
    if (!(adam.eps >= 0.0)) throw ValidationError("Adam eps must be >= 0");
    for (double l : {lambdas.lambda1, lambdas.lambda2, lambdas.lambda3})
        if (!(l >= 0.0) || !std::isfinite(l)) throw ValidationError("loss weights must be non-negative");
    if (!(alpha_floor >= 0.0 && alpha_floor <= 1.0)) throw ValidationError("alpha_floor must lie in [0, 1]");
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
    if (lambda3_ramp && !(ramp_fraction > 0.0 && ramp_fraction <= 1.0))
        throw ValidationError("ramp_fraction must lie in (0, 1]");
    if (log_interval < 1) throw ValidationError("log_interval must be >= 1");
    if (checkpoint_interval < 0) throw ValidationError("checkpoint_interval must be >= 0");
    if (scene_extent < 0.0) throw ValidationError("scene_extent must be >= 0");
    if (samples) samples->validate();
    render.validate();
}

SampleSpec TrainConfig::sample_spec() const {
    return samples ? *samples : SampleSpec::for_count(features_of(arm).samples);
}

LossOptions TrainConfig::loss_options(long iteration) const {
    LossOptions o;
    o.weights = lambdas;
    o.alpha_floor = alpha_floor;
    o.epsilon = epsilon;
    const bool constraints = features_of(arm).constraints;
    o.adaptive_weights = constraints;
    o.gradient_difference = constraints;
    if (constraints && lambda3_ramp) {
        const double ramp_len = ramp_fraction * std::max(iterations, 1);
        o.weights.lambda3 = lambdas.lambda3 * std::min(1.0, static_cast<double>(iteration) / ramp_len);
    }
    return o;
}

std::string TrainLog::to_csv(bool include_timing) const {
    std::string out = "iteration,weighted_l1,dssim,grad,composite,psnr,seconds\n";
    char buf[512];
    for (const TrainRecord& r : records) {
        std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.6f\n", r.iteration, r.loss.weighted_l1,
                      r.loss.dssim, r.loss.grad, r.loss.composite, r.psnr, include_timing ? r.seconds : 0.0);
        out += buf;
    }
    return out;
}

TrainRecord evaluate_views(const Scene& scene, std::span<const View> views, const TrainConfig& cfg, long iteration) {
    if (views.empty()) throw ValidationError("evaluate_views: no views");
    TrainRecord rec;
    rec.iteration = iteration;
    const SampleSpec spec = cfg.sample_spec();
    const LossOptions opts = cfg.loss_options(iteration);
    for (const View& v : views) {
        const ImageBuffer img = render(scene, v.camera, cfg.render, spec);
        const LossBreakdown b = composite_loss(img, v.target, opts);
        rec.loss.weighted_l1 += b.weighted_l1;
        rec.loss.dssim += b.dssim;
        rec.loss.grad += b.grad;
        rec.loss.composite += b.composite;
        rec.psnr += psnr(img, v.target);
        rec.loss.lambda1 = b.lambda1;
        rec.loss.lambda2 = b.lambda2;
        rec.loss.lambda3 = b.lambda3;
    }
    const double n = static_cast<double>(views.size());
    rec.loss.weighted_l1 /= n;
    rec.loss.dssim /= n;
    rec.loss.grad /= n;
    rec.loss.composite /= n;
    rec.psnr /= n;
    return rec;
}

namespace {

double derived_extent(const Scene& s) {
    Vec3 centroid = Vec3::Zero();
    for (const Gaussian3D& g : s.gaussians) centroid += g.center;
    centroid /= static_cast<double>(s.gaussians.size());
    double r = 0.0;
    for (const Gaussian3D& g : s.gaussians) r = std::max(r, (g.center - centroid).norm());
    return r > 0.0 ? r : 1.0;
}

}  // namespace

TrainResult train(const Scene& initial, std::span<const View> views, const TrainConfig& cfg) {
    cfg.validate();
    initial.validate();
    if (initial.gaussians.empty()) throw ValidationError("train: scene has no Gaussians");
    if (views.empty()) throw ValidationError("train: no target views");
    for (const View& v : views) {
        v.camera.validate();
        if (v.target.height() != v.camera.height || v.target.width() != v.camera.width)
            throw ShapeError("train: target image does not match its camera");
    }

    AdamConfig adam = cfg.adam;
    adam.scene_extent = cfg.scene_extent > 0.0 ? cfg.scene_extent : derived_extent(initial);
    const SampleSpec spec = cfg.sample_spec();
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

    TrainResult result;
    ParamVector params = pack_params(initial);
    Scene current = initial;
    AdamState state;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, views.size() - 1);
    bool have_best = false;

    auto note = [&](const TrainRecord& rec, const Scene& s) {
        result.log.records.push_back(rec);
        if (!have_best || rec.psnr > result.best_psnr) {
            have_best = true;
            result.best_psnr = rec.psnr;
            result.best_iteration = rec.iteration;
            result.best_scene = s;
        }
    };
    auto checkpoint = [&](long it) {
        if (cfg.checkpoint_dir.empty()) return;
        std::filesystem::create_directories(cfg.checkpoint_dir);
        save_scene(current, cfg.checkpoint_dir / (std::string(to_string(cfg.arm)) + "_" + std::to_string(it) + ".gsscene"));
    };

    for (long it = 0;; ++it) {
        const bool log_now = it % cfg.log_interval == 0 || it == cfg.iterations;
        if (it == cfg.iterations) {
            TrainRecord rec = evaluate_views(current, views, cfg, it);
            rec.seconds = elapsed();
            note(rec, current);
            break;
        }
        const View& view = views.size() == 1 ? views[0] : views[pick(rng)];
        Evaluation ev = evaluate_with_gradient(current, view.camera, view.target, cfg.render, spec, cfg.loss_options(it));
        if (!std::isfinite(ev.loss.composite)) {
            throw TrainingDiverged("training diverged at iteration " + std::to_string(it) +
                                       ": composite loss is not finite",
                                   current, it);
        }
        if (log_now) {
            TrainRecord rec;
            if (views.size() == 1) {
                rec.iteration = it;
                rec.loss = ev.loss;
                rec.psnr = psnr(ev.image, view.target);
            } else {
                rec = evaluate_views(current, views, cfg, it);
            }
            rec.seconds = elapsed();
            note(rec, current);
        }
        const std::vector<double> grads = ev.grads.flatten();
        try {
            adam_step(params, grads, state, adam);
        } catch (const NumericError& e) {
            throw TrainingDiverged("training diverged at iteration " + std::to_string(it) + ": " + e.what(), current, it);
        }
        for (std::size_t k = 0; k < params.size(); ++k) {
            if (!std::isfinite(params.values[k]))
                throw TrainingDiverged("training diverged at iteration " + std::to_string(it) + ": " +
                                           ParamVector::describe(k) + " is not finite",
                                       current, it);
        }
        current = unpack_params(params, initial);
        if (cfg.checkpoint_interval > 0 && (it + 1) % cfg.checkpoint_interval == 0 && it + 1 < cfg.iterations)
            checkpoint(it + 1);
    }
    checkpoint(cfg.iterations);
    result.final_scene = std::move(current);
    return result;
}

}  // namespace msplat
