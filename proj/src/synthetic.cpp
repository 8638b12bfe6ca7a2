// SPDX-License-Identifier: Apache-2.0
#include "msplat/errors.hpp"
#include "msplat/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>

namespace msplat {
namespace {

const Vec3 kDark{0.08, 0.10, 0.14};
const Vec3 kLight{0.92, 0.88, 0.80};

/// Pattern in continuous pixel coordinates: returns 1 for the light color.
using Indicator = std::function<bool(double x, double y)>;

ImageBuffer rasterize_coverage(int h, int w, int ss, const Indicator& light) {
    ImageBuffer img(h, w);
    const double inv = 1.0 / (static_cast<double>(ss) * ss);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            int hits = 0;
            for (int a = 0; a < ss; ++a)
                for (int b = 0; b < ss; ++b)
                    if (light(j + (b + 0.5) / ss, i + (a + 0.5) / ss)) ++hits;
            const double cov = hits * inv;
            for (int c = 0; c < 3; ++c) img.at(i, j, c) = kDark[c] + cov * (kLight[c] - kDark[c]);
        }
    }
    return img;
}

/// Checkerboard with the given repeat length, rotated by `angle` about the image center.
Indicator checker(double period, double angle, double cx, double cy) {
    const double cs = std::cos(angle), sn = std::sin(angle);
    const double cell = 0.5 * period;
    return [=](double x, double y) {
        const double u = cs * (x - cx) + sn * (y - cy);
        const double v = -sn * (x - cx) + cs * (y - cy);
        const long a = static_cast<long>(std::floor(u / cell));
        const long b = static_cast<long>(std::floor(v / cell));
        return ((a + b) & 1) == 0;
    };
}

/// Half-plane whose boundary passes through (cx, cy) at `angle` from vertical.
Indicator half_plane(double angle, double cx, double cy) {
    const double nx = std::cos(angle), ny = -std::sin(angle);
    return [=](double x, double y) { return nx * (x - cx) + ny * (y - cy) >= 0.0; };
}

Indicator thin_lines(double spacing, double width, double angle) {
    const double nx = std::cos(angle), ny = std::sin(angle);
    return [=](double x, double y) {
        const double t = nx * x + ny * y;
        const double r = t - spacing * std::floor(t / spacing);
        return r < width;
    };
}

void require_extent(int h, int w) {
    if (h < 16 || w < 16) {
        throw ValidationError("synthetic targets need H, W >= 16 (got " + std::to_string(h) + "x" +
                              std::to_string(w) + ")");
    }
}

Scene random_blobs(const CameraModel& cam, int count, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    Scene s;
    s.background = {0.05, 0.05, 0.05};
    const double px = kSyntheticDepth / cam.fx;  // world units per pixel at the synthetic depth
    for (int k = 0; k < count; ++k) {
        Gaussian3D g;
        const double z = kSyntheticDepth + (uni(rng) - 0.5) * 0.6;
        const double u = (0.1 + 0.8 * uni(rng)) * cam.width;
        const double v = (0.1 + 0.8 * uni(rng)) * cam.height;
        g.center = {(u - cam.cx) / cam.fx * z, (v - cam.cy) / cam.fy * z, z};
        g.rotation = Quat{normal(rng), normal(rng), normal(rng), normal(rng)}.normalized();
        for (int a = 0; a < 3; ++a) g.log_scale[a] = std::log(px * (1.5 + 4.0 * uni(rng)));
        g.color_logit = {1.5 * normal(rng), 1.5 * normal(rng), 1.5 * normal(rng)};
        g.opacity_logit = 0.5 + uni(rng);
        s.gaussians.push_back(g);
    }
    return s;
}

}  // namespace

std::string_view to_string(TargetKind kind) {
    switch (kind) {
        case TargetKind::checkerboard: return "checkerboard";
        case TargetKind::thin_lines: return "thin_lines";
        case TargetKind::edge_halfplane: return "edge_halfplane";
        case TargetKind::gaussian_blobs: return "gaussian_blobs";
    }
    return "?";
}

TargetKind parse_target_kind(std::string_view s) {
    for (TargetKind k : {TargetKind::checkerboard, TargetKind::thin_lines, TargetKind::edge_halfplane,
                         TargetKind::gaussian_blobs})
        if (to_string(k) == s) return k;
    throw ValidationError("unknown target kind '" + std::string(s) + "'");
}

CameraModel synthetic_camera(int height, int width) {
    return CameraModel::looking_down_z(width, height, static_cast<double>(width));
}

SyntheticTarget make_synthetic_target(TargetKind kind, int height, int width, std::uint64_t seed,
                                      const TargetOptions& opts) {
    require_extent(height, width);
    if (opts.period < 2) throw ValidationError("checkerboard period must be >= 2");
    if (opts.coverage_samples < 1) throw ValidationError("coverage_samples must be >= 1");
    SyntheticTarget out;
    out.camera = synthetic_camera(height, width);
    const int ss = opts.coverage_samples;
    switch (kind) {
        case TargetKind::checkerboard:
            out.image = rasterize_coverage(height, width, ss, checker(opts.period, 0.0, 0.0, 0.0));
            break;
        case TargetKind::thin_lines:
            out.image = rasterize_coverage(height, width, ss, thin_lines(5.0, 0.75, 0.35));
            break;
        case TargetKind::edge_halfplane:
            out.image = rasterize_coverage(height, width, ss, half_plane(0.2, 0.5 * width, 0.5 * height));
            break;
        case TargetKind::gaussian_blobs: {
            std::mt19937_64 rng(seed);
            Scene s = random_blobs(out.camera, opts.blob_count, rng);
            out.image = render(s, out.camera, RenderConfig{}, SampleSpec::rotated_grid4());
            out.scene = std::move(s);
            break;
        }
    }
    return out;
}

Scene initialize_scene(const CameraModel& cam, int count, std::uint64_t seed, const Vec3& background) {
    if (count < 1) throw ValidationError("initialize_scene: count must be >= 1");
    cam.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Scene s;
    s.background = background;
    s.gaussians.resize(static_cast<std::size_t>(count));
    for (Gaussian3D& g : s.gaussians) {
        const double z = kSyntheticDepth - 0.5 + uni(rng);
        const double u = uni(rng) * cam.width;
        const double v = uni(rng) * cam.height;
        g.center = {(u - cam.cx) / cam.fx * z, (v - cam.cy) / cam.fy * z, z};
    }
    double nn_sum = 0.0;
    for (std::size_t a = 0; a < s.gaussians.size(); ++a) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t b = 0; b < s.gaussians.size(); ++b)
            if (a != b) best = std::min(best, (s.gaussians[a].center - s.gaussians[b].center).squaredNorm());
        nn_sum += std::isfinite(best) ? std::sqrt(best) : kSyntheticDepth / cam.fx * 0.5 * cam.width;
    }
    const double scale = 0.5 * nn_sum / static_cast<double>(count);
    for (Gaussian3D& g : s.gaussians) {
        g.rotation = Quat{};
        g.log_scale = Vec3::Constant(std::log(scale));
        g.color_logit = Vec3::Zero();
        g.opacity_logit = logit(0.1);
    }
    return s;
}

Scene make_sharp_scene(TargetKind kind, const CameraModel& cam) {
    Indicator light;
    const double cx = 0.5 * cam.width, cy = 0.5 * cam.height;
    switch (kind) {
        case TargetKind::edge_halfplane: light = half_plane(0.2, cx, cy); break;
        case TargetKind::checkerboard: light = checker(6.0, 0.3, cx, cy); break;
        default: throw ValidationError("make_sharp_scene supports edge_halfplane and checkerboard");
    }
    // Rotated lattice of 0.7 px spacing with footprints well under a pixel.
    constexpr double kSpacing = 0.7;
    constexpr double kSigmaPx = 0.3;
    constexpr double kAngle = 0.41;
    const double cs = std::cos(kAngle), sn = std::sin(kAngle);
    const double reach = 0.5 * std::hypot(cam.width, cam.height) + 4.0;
    const int steps = static_cast<int>(std::ceil(reach / kSpacing));
    Scene s;
    s.background = {0.0, 0.0, 0.0};
    for (int a = -steps; a <= steps; ++a) {
        for (int b = -steps; b <= steps; ++b) {
            const double x = cx + kSpacing * (cs * a - sn * b);
            const double y = cy + kSpacing * (sn * a + cs * b);
            if (x < -3.0 || y < -3.0 || x > cam.width + 3.0 || y > cam.height + 3.0) continue;
            Gaussian3D g;
            const double z = kSyntheticDepth;
            g.center = {(x - cam.cx) / cam.fx * z, (y - cam.cy) / cam.fy * z, z};
            g.log_scale = Vec3::Constant(std::log(kSigmaPx * z / cam.fx));
            const Vec3& col = light(x, y) ? kLight : kDark;
            for (int c = 0; c < 3; ++c) g.color_logit[c] = logit(col[c]);
            g.opacity_logit = logit(0.95);
            s.gaussians.push_back(g);
        }
    }
    return s;
}

std::vector<std::string> benchmark_ids() {
    return {"checker_edge", "checkerboard", "edge_halfplane", "thin_lines", "gaussian_blobs"};
}

Benchmark make_benchmark(std::string_view id, int height, int width, std::uint64_t seed, int gaussian_count) {
    require_extent(height, width);
    Benchmark bench;
    bench.id = std::string(id);
    const CameraModel cam = synthetic_camera(height, width);
    if (id == "checker_edge") {
        // Rotated checkerboard on the left half, slanted edge on the right.
        const Indicator board = checker(8.0, 0.3, 0.25 * width, 0.5 * height);
        const Indicator edge = half_plane(0.25, 0.75 * width, 0.5 * height);
        const double split = 0.5 * width;
        const Indicator both = [=](double x, double y) { return x < split ? board(x, y) : edge(x, y); };
        bench.views.push_back({cam, rasterize_coverage(height, width, 16, both)});
    } else {
        TargetKind kind;
        try {
            kind = parse_target_kind(id);
        } catch (const ValidationError&) {
            throw ValidationError("unknown benchmark '" + std::string(id) + "'");
        }
        bench.views.push_back({cam, make_synthetic_target(kind, height, width, seed).image});
    }
    bench.initial = initialize_scene(cam, gaussian_count, seed);
    return bench;
}

}  // namespace msplat
