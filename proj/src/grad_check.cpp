// SPDX-License-Identifier: Apache-2.0
#include "msplat/autodiff.hpp"
#include "msplat/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>

namespace msplat {
namespace {

/// FNV-1a over the contributor structure of a tape.
std::uint64_t contributor_signature(const Tape& tape) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xffu;
            h *= 1099511628211ull;
        }
    };
    for (const TileTape& t : tape.tiles) {
        for (std::uint32_t b : t.sample_begin) mix(b);
        for (const TapeEntry& e : t.entries) mix(tape.splats[t.splats[e.splat]].source_index);
    }
    return h;
}

}  // namespace

GradCheckReport grad_check(const Scene& scene, const CameraModel& cam, const ImageBuffer& gt,
                           const RenderConfig& cfg, const SampleSpec& samples, const LossOptions& loss,
                           const GradCheckOptions& options) {
    RenderOutput base = render_with_tape(scene, cam, cfg, samples);
    std::optional<WeightMap> frozen;
    if (loss.adaptive_weights) frozen = weight_map(pixel_error(base.image, gt), loss.alpha_floor, loss.epsilon);
    const WeightMap* wm = frozen ? &*frozen : nullptr;

    const ImageBuffer d_image = backward_loss(base.image, gt, loss, wm);
    std::vector<double> analytic = backward_render(base.tape, d_image, scene, cam).flatten();
    if (options.corrupt_analytic) options.corrupt_analytic(analytic);
    const std::uint64_t base_sig = contributor_signature(base.tape);

    const ParamVector theta = pack_params(scene);
    auto evaluate = [&](const ParamVector& p, bool& same_support) {
        const Scene s = unpack_params(p, scene);
        RenderOutput out = render_with_tape(s, cam, cfg, samples);
        same_support = contributor_signature(out.tape) == base_sig;
        return composite_loss(out.image, gt, loss, wm).composite;
    };

    constexpr std::array<Field, 5> kFields{Field::center, Field::rotation, Field::log_scale, Field::color,
                                           Field::opacity};
    GradCheckReport report;
    for (Field f : kFields) report.classes.push_back({std::string(field_name(f))});

    for (std::size_t idx = 0; idx < theta.size(); ++idx) {
        const double h = options.step_scale * std::max(1.0, std::abs(theta.values[idx]));
        ParamVector plus = theta, minus = theta;
        plus.values[idx] += h;
        minus.values[idx] -= h;
        bool same_plus = true, same_minus = true;
        const double fp = evaluate(plus, same_plus);
        const double fm = evaluate(minus, same_minus);
        const double numeric = (fp - fm) / (2.0 * h);
        if (!same_plus || !same_minus) {
            report.cutoff_adjacent.push_back(idx);
            continue;
        }
        const double a = analytic[idx];
        const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
        const double rel = std::abs(a - numeric) / denom;
        ParamClassResult& cls = report.classes[static_cast<std::size_t>(field_of_slot(idx % kParamsPerGaussian))];
        ++cls.checked;
        if (rel >= cls.max_rel_error || !std::isfinite(rel)) {
            cls.max_rel_error = rel;
            cls.worst_index = idx;
            cls.analytic = a;
            cls.numeric = numeric;
        }
    }
    for (auto& cls : report.classes) {
        cls.pass = cls.max_rel_error < options.tolerance && std::isfinite(cls.max_rel_error);
        report.pass = report.pass && cls.pass;
    }
    return report;
}

std::string GradCheckReport::to_table() const {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-10s %12s  %-28s %14s %14s  %s\n", "class", "max_rel_err", "location",
                  "analytic", "numeric", "status");
    out += buf;
    for (const auto& c : classes) {
        const std::string loc = c.checked ? ParamVector::describe(c.worst_index) : "-";
        std::snprintf(buf, sizeof(buf), "%-10s %12.3e  %-28s %14.6e %14.6e  %s\n", c.name.c_str(), c.max_rel_error,
                      loc.c_str(), c.analytic, c.numeric, c.pass ? "PASS" : "FAIL");
        out += buf;
    }
    if (!cutoff_adjacent.empty()) {
        out += "cutoff-adjacent (excluded):";
        for (std::size_t idx : cutoff_adjacent) out += " [" + ParamVector::describe(idx) + "]";
        out += "\n";
    }
    out += pass ? "overall: PASS\n" : "overall: FAIL\n";
    return out;
}

GradCheckFixture default_gradcheck_fixture(unsigned long long seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto range = [&](double lo, double hi) { return lo + (hi - lo) * uni(rng); };

    GradCheckFixture fx;
    fx.camera = CameraModel::looking_down_z(16, 16, 16.0);
    auto random_scene = [&](int count) {
        Scene s;
        s.background = {0.1, 0.15, 0.2};
        for (int k = 0; k < count; ++k) {
            Gaussian3D g;
            g.center = {range(-0.9, 0.9), range(-0.9, 0.9), range(3.6, 4.4)};
            g.rotation = Quat{normal(rng), normal(rng), normal(rng), normal(rng)}.normalized();
            g.log_scale = {std::log(range(0.35, 0.7)), std::log(range(0.35, 0.7)), std::log(range(0.35, 0.7))};
            g.color_logit = {normal(rng), normal(rng), normal(rng)};
            g.opacity_logit = range(-0.5, 1.5);
            s.gaussians.push_back(g);
        }
        return s;
    };
    fx.scene = random_scene(5);
    const Scene other = random_scene(6);
    RenderConfig cfg;
    fx.target = render(other, fx.camera, cfg, SampleSpec::rotated_grid4());
    for (double& v : fx.target.values()) v = std::clamp(v + 0.02 * normal(rng), 0.0, 1.0);
    return fx;
}

}  // namespace msplat
