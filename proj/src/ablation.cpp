// SPDX-License-Identifier: Apache-2.0
#include "msplat/diagnostics.hpp"
#include "msplat/errors.hpp"
#include "msplat/trainer.hpp"

#include <chrono>
#include <cstdio>
#include <cstring>

namespace msplat {

std::uint64_t scene_hash(const Scene& scene) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](double d) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, sizeof bits);
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xffu;
            h *= 1099511628211ull;
        }
    };
    for (double v : pack_params(scene).values) mix(v);
    for (int c = 0; c < 3; ++c) mix(scene.background[c]);
    return h;
}

std::string AblationTable::to_csv() const {
    std::string out = "benchmark,arm,psnr,ssim,weighted_l1,dssim,grad,composite,best_iteration,scene0_hash\n";
    char buf[512];
    for (const AblationRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%ld,%016llx\n", benchmark.c_str(),
                      std::string(to_string(r.arm)).c_str(), r.psnr, r.ssim, r.final_loss.weighted_l1,
                      r.final_loss.dssim, r.final_loss.grad, r.final_loss.composite, r.best_iteration,
                      static_cast<unsigned long long>(r.initial_hash));
        out += buf;
    }
    return out;
}

std::string AblationTable::to_text() const {
    std::string out = "ablation on " + benchmark + "\n";
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%-17s %9s %8s %12s %10s %10s %11s %6s %8s\n", "arm", "PSNR(dB)", "SSIM",
                  "weighted_l1", "dssim", "grad", "composite", "best", "time(s)");
    out += buf;
    for (const AblationRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-17s %9.3f %8.4f %12.6f %10.6f %10.6f %11.6f %6ld %8.1f\n",
                      std::string(to_string(r.arm)).c_str(), r.psnr, r.ssim, r.final_loss.weighted_l1,
                      r.final_loss.dssim, r.final_loss.grad, r.final_loss.composite, r.best_iteration, r.seconds);
        out += buf;
    }
    return out;
}

const AblationRow& AblationTable::row(Arm arm) const {
    for (const AblationRow& r : rows)
        if (r.arm == arm) return r;
    throw ValidationError("ablation table has no row for arm " + std::string(to_string(arm)));
}

AblationTable run_ablation(const AblationSpec& spec) {
    const Benchmark bench = make_benchmark(spec.benchmark, spec.height, spec.width, spec.base.seed,
                                           spec.gaussian_count);
    AblationTable table;
    table.benchmark = bench.id;
    for (Arm arm : kAllArms) {
        TrainConfig cfg = spec.base;
        cfg.arm = arm;
        const Scene scene0 = bench.initial;
        const auto t0 = std::chrono::steady_clock::now();
        const TrainResult res = train(scene0, bench.views, cfg);

        AblationRow row;
        row.arm = arm;
        row.initial_hash = scene_hash(scene0);
        row.best_iteration = res.best_iteration;
        const TrainRecord eval = evaluate_views(res.best_scene, bench.views, cfg, cfg.iterations);
        row.psnr = eval.psnr;
        row.final_loss = eval.loss;
        double ssim = 0.0;
        for (const View& v : bench.views) ssim += ssim_index(render(res.best_scene, v.camera, cfg.render, cfg.sample_spec()), v.target);
        row.ssim = ssim / static_cast<double>(bench.views.size());
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        table.rows.push_back(row);
    }
    return table;
}

}  // namespace msplat
